mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

pub const THREADS_ENV: &str = "STAGED_SELECT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "staged-select",
    version,
    about = "Staged selection over stochastic process ensembles"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core. STAGED_SELECT_THREADS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output format; defaults to the config's, then to the command's own.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exhaustive,
    Mc,
}

#[derive(Debug, Args)]
pub struct Run {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Strategy name or JSON object, overriding the config's strategies.
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a configuration and describe the instance.
    Validate {
        #[command(flatten)]
        run: Run,
    },
    /// Run one strategy on one sampled ensemble and export its trace.
    Simulate {
        #[command(flatten)]
        run: Run,
        /// Also write a JSON summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Build and check the coupling on every atom or on sampled ensembles.
    Verify {
        #[command(flatten)]
        run: Run,
        #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
        mode: Mode,
        /// Write every pairwise check as CSV here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Exact values of strategies and of the optimum.
    Oracle {
        #[command(flatten)]
        run: Run,
        /// Also run the exhaustive policy search.
        #[arg(long)]
        search: bool,
        /// Write the backward-induction decisions as CSV here.
        #[arg(long)]
        dp_table: Option<PathBuf>,
    },
    /// Random sweep of the order-statistic inequality.
    Lemma {
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Paired Monte Carlo comparison of strategies against greedy.
    Compare {
        #[command(flatten)]
        run: Run,
        /// Report coupling violations per strategy instead of values.
        #[arg(long)]
        coupled: bool,
    },
    /// Greedy against drift_aware under persistent per-process drift.
    Drift {
        #[command(flatten)]
        run: Run,
        /// Replace the drift law by the point mass at 0.
        #[arg(long)]
        zero_drift: bool,
    },
}

fn thread_count(flag: usize) -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(flag),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_count(cli.threads).and_then(|threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
        commands::dispatch(&cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
