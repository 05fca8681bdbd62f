use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Schedule variants each name the ordering constraint on observation
/// times `0 < t_1 < ... < t_k = T` or survivor sizes `N > n_1 > ... > n_k = 1`
/// that was violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(
        "schedule lists must be nonempty and of equal length (times: {times}, sizes: {sizes})"
    )]
    ScheduleShape { times: usize, sizes: usize },
    #[error(
        "observation times must satisfy 0 < t_1 < ... < t_k (violated at position {position})"
    )]
    NonMonotoneTimes { position: usize },
    #[error("survivor sizes must strictly decrease (violated at position {position})")]
    NonDecreasingSizes { position: usize },
    #[error("last survivor size must be 1, got {got}")]
    LastSizeNotOne { got: usize },
    #[error("last observation time must equal the horizon T = {horizon}, got {got}")]
    LastTimeNotT { got: usize, horizon: usize },
    #[error("first survivor size n_1 = {first} must be smaller than N = {n}")]
    SizesExceedN { first: usize, n: usize },

    #[error("invalid increment model: {0}")]
    InvalidModel(String),
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("paths must start at 0 (process {process} starts at {value})")]
    NonZeroStart { process: usize, value: f64 },

    #[error("model is not discrete: {0}")]
    NotDiscrete(String),
    #[error("support value {0} is not exactly representable on the 2^-20 grid used for exact arithmetic")]
    InexactSupport(f64),
    #[error("enumeration of {size} atoms exceeds cap {cap}")]
    EnumerationTooLarge { size: String, cap: u64 },
    #[error("model violates the independent-increments hypothesis: {0}")]
    IndependenceViolated(String),
    #[error("exhaustive search over {size} strategies exceeds cap {cap}")]
    SearchTooLarge { size: String, cap: u64 },

    #[error("stage {got} requested but the next stage is {expected}")]
    StageOutOfOrder { expected: usize, got: usize },
    #[error("strategy `{strategy}` violated the selection contract at stage {stage}: {reason}")]
    StrategyViolation {
        strategy: String,
        stage: usize,
        reason: String,
    },
    #[error("strategy `{0}` is not deterministic; fix its auxiliary seed")]
    NonDeterministicStrategy(String),

    #[error("order-statistic precondition A <= B violated at coordinate {index}")]
    PreconditionViolated { index: usize },
    #[error("at least 2 replications are required, got {0}")]
    InvalidReps(usize),
    #[error("strategy catalog is empty")]
    EmptyCatalog,
    #[error("invalid rational `{0}`")]
    InvalidRational(String),
}

pub type Result<T> = std::result::Result<T, Error>;
