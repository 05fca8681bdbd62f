//! Staged elimination over ensembles of discrete-time stochastic processes.
//!
//! * [`model`]: increment laws, schedules, path ensembles and the
//!   path/increment transform.
//! * [`enumerate`]: exact enumeration of finite path spaces.
//! * [`selection`]: the staged selection engine, temporal indices and
//!   built-in strategies.
//! * [`alignment`]: the coupling that maps any strategy's run onto a greedy
//!   run it is dominated by, its inverse, and its verification.
//! * [`oracle`]: exact expectations, backward induction, exhaustive strategy
//!   search and the order-statistic lemma.
//! * [`experiments`]: seeded, parallel Monte Carlo comparisons.
//! * [`config`]: JSON run descriptions.
//! * [`seeding`]: seed derivation and ensemble fingerprints.

pub mod alignment;
pub mod config;
pub mod enumerate;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod seeding;
pub mod selection;

pub use error::{Error, Result};
pub use model::{
    from_increments, sample_ensemble, to_increments, validate_schedule, BlockIncrements,
    DiscreteLaw, DriftModel, IncrementModel, PathEnsemble, ProcessModel, Schedule, StageLaws,
};
pub use selection::{
    baseline_strategies, full_catalog, greedy_strategy, run_selection, HistoryView, SelectionTrace,
    Strategy, StrategySpec,
};
