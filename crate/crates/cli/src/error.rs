use std::process::ExitCode;

use staged_select::Error;
use thiserror::Error;

/// Failure of a command, carrying its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Verification(_) => 1,
            Self::Core(Error::EnumerationTooLarge { .. } | Error::SearchTooLarge { .. }) => 3,
            Self::Core(Error::IndependenceViolated(_)) => 4,
            Self::Core(Error::StrategyViolation { .. }) => 1,
            Self::Config(_) | Self::Core(_) | Self::Io(_) => 2,
        })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
