//! Monte Carlo estimation and paired strategy comparisons.
//!
//! Replication `r` samples its ensemble from `split(seed, r)`. Replications
//! run in parallel but are collected in index order and reduced sequentially,
//! so every statistic is bit-identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::{build_alignment, invert_alignment};
use crate::error::{Error, Result};
use crate::model::{sample_ensemble, DriftModel, PathEnsemble, ProcessModel, Schedule};
use crate::seeding::{split, Digest};
use crate::selection::{greedy_strategy, run_selection, Strategy, StrategySpec};

const Z95: f64 = 1.96;

/// Digests are written as 16 hex digits so JSON readers keep every bit.
fn hex_digest<S: serde::Serializer>(d: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{d:016x}"))
}

/// Sample mean with its standard error and normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

impl Summary {
    /// Two-pass mean and `sd / sqrt(n)`, summed in slice order.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        Self {
            mean,
            stderr,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub strategy: String,
    pub replications: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    /// Fingerprint of every sampled ensemble, in replication order.
    #[serde(serialize_with = "hex_digest")]
    pub ensemble_digest: u64,
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::InvalidReps(reps));
    }
    Ok(())
}

fn ensemble_hash(x: &PathEnsemble) -> u64 {
    let mut d = Digest::default();
    d.push_f64s(x.values());
    d.finish()
}

fn fold_digest(hashes: impl Iterator<Item = u64>) -> u64 {
    let mut d = Digest::default();
    for h in hashes {
        d.push(h);
    }
    d.finish()
}

/// Samples replication `r` for schedule `s`.
pub fn replication(
    model: &ProcessModel,
    s: &Schedule,
    seed: u64,
    r: usize,
) -> Result<PathEnsemble> {
    sample_ensemble(model, s.n(), s.horizon(), split(seed, r as u64))
}

/// Estimates `E[Alg(X)]` from `reps` independent replications.
pub fn mc_estimate(
    model: &ProcessModel,
    s: &Schedule,
    alg: &dyn Strategy,
    reps: usize,
    seed: u64,
) -> Result<McResult> {
    check_reps(reps)?;
    let draws: Vec<(f64, u64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let x = replication(model, s, seed, r)?;
            Ok((run_selection(&x, s, alg)?.final_value, ensemble_hash(&x)))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let summary = Summary::of(&values);
    Ok(McResult {
        strategy: alg.id(),
        replications: reps,
        mean: summary.mean,
        stderr: summary.stderr,
        ci95: summary.ci95,
        seed,
        ensemble_digest: fold_digest(draws.iter().map(|d| d.1)),
    })
}

/// One strategy's row of a paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub replications: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// Mean of `strategy - greedy` over the shared replications.
    pub paired_diff_vs_greedy: f64,
    pub paired_stderr: f64,
}

impl ComparisonRow {
    /// Paired difference in units of its standard error; 0 when both vanish.
    pub fn paired_z(&self) -> f64 {
        if self.paired_stderr == 0.0 {
            if self.paired_diff_vs_greedy == 0.0 {
                0.0
            } else {
                self.paired_diff_vs_greedy.signum() * f64::INFINITY
            }
        } else {
            self.paired_diff_vs_greedy / self.paired_stderr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub model: String,
    pub replications: usize,
    pub seed: u64,
    /// Fingerprint of the shared ensembles.
    #[serde(serialize_with = "hex_digest")]
    pub ensemble_digest: u64,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, strategy: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

/// Evaluates every strategy on the same sampled ensembles (common random
/// numbers) and reports paired differences against greedy.
pub fn compare_strategies(
    model: &ProcessModel,
    s: &Schedule,
    catalog: &[StrategySpec],
    reps: usize,
    seed: u64,
) -> Result<Comparison> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    check_reps(reps)?;
    let greedy = greedy_strategy();
    let draws: Vec<(f64, Vec<f64>, u64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let x = replication(model, s, seed, r)?;
            let reference = run_selection(&x, s, &greedy)?.final_value;
            let values = catalog
                .iter()
                .map(|alg| Ok(run_selection(&x, s, alg)?.final_value))
                .collect::<Result<Vec<f64>>>()?;
            Ok((reference, values, ensemble_hash(&x)))
        })
        .collect::<Result<_>>()?;
    let rows = catalog
        .iter()
        .enumerate()
        .map(|(k, alg)| {
            let values: Vec<f64> = draws.iter().map(|d| d.1[k]).collect();
            let diffs: Vec<f64> = draws.iter().map(|d| d.1[k] - d.0).collect();
            let own = Summary::of(&values);
            let paired = Summary::of(&diffs);
            ComparisonRow {
                strategy: alg.id(),
                replications: reps,
                mean: own.mean,
                stderr: own.stderr,
                ci95: own.ci95,
                paired_diff_vs_greedy: paired.mean,
                paired_stderr: paired.stderr,
            }
        })
        .collect();
    Ok(Comparison {
        model: model.tag(),
        replications: reps,
        seed,
        ensemble_digest: fold_digest(draws.iter().map(|d| d.2)),
        rows,
    })
}

/// Violation counts of the coupling checks for one strategy over sampled
/// realizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledRow {
    pub strategy: String,
    pub realizations: usize,
    /// Realizations where some pairwise or headline inequality failed.
    pub dominance_violations: usize,
    /// Realizations where some block is not a measurable row permutation.
    pub permutation_violations: usize,
    /// Largest `|invert(build(x)) - x|` over all realizations and cells.
    pub max_inversion_error: f64,
    /// Mean of `greedy(φ(X)) - Alg(X)`; never negative on any realization.
    pub mean_gap: f64,
}

impl CoupledRow {
    pub fn ok(&self, inversion_tolerance: f64) -> bool {
        self.dominance_violations == 0
            && self.permutation_violations == 0
            && self.max_inversion_error <= inversion_tolerance
    }
}

/// Builds the alignment on every replication and counts check failures.
pub fn coupled_dominance_sweep(
    model: &ProcessModel,
    s: &Schedule,
    catalog: &[StrategySpec],
    reps: usize,
    seed: u64,
) -> Result<Vec<CoupledRow>> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    check_reps(reps)?;
    let outcomes: Vec<Vec<(bool, bool, f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let x = replication(model, s, seed, r)?;
            catalog
                .iter()
                .map(|alg| {
                    let w = build_alignment(&x, s, alg)?;
                    let back = invert_alignment(&w.y, s, alg)?;
                    Ok((
                        w.dominance_report.ok(),
                        w.permutation_report.ok(),
                        back.max_abs_diff(&x),
                        w.greedy_trace.final_value - w.alg_trace.final_value,
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(catalog
        .iter()
        .enumerate()
        .map(|(k, alg)| {
            let col = || outcomes.iter().map(move |o| o[k]);
            CoupledRow {
                strategy: alg.id(),
                realizations: reps,
                dominance_violations: col().filter(|o| !o.0).count(),
                permutation_violations: col().filter(|o| !o.1).count(),
                max_inversion_error: col().map(|o| o.2).fold(0.0, f64::max),
                mean_gap: col().map(|o| o.3).sum::<f64>() / reps as f64,
            }
        })
        .collect())
}

/// Schedule of the drift experiment: `N = 8`, times `(3, 10)`, sizes `(2, 1)`.
pub fn default_drift_schedule() -> Schedule {
    Schedule::new(&[3, 10], &[2, 1], 8, 10).expect("static schedule")
}

/// Greedy against the history-using `drift_aware` rule under persistent drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub drift_model: String,
    /// Whether the model breaks independent increments (always for drift).
    pub violates_independence: bool,
    pub comparison: Comparison,
    /// `E[drift_aware - greedy]`.
    pub advantage: f64,
    pub advantage_stderr: f64,
    pub z: f64,
}

pub fn dependent_model_experiment(
    drift: &DriftModel,
    s: &Schedule,
    reps: usize,
    seed: u64,
) -> Result<DriftReport> {
    let model = ProcessModel::Drift(drift.clone());
    let comparison = compare_strategies(
        &model,
        s,
        &[greedy_strategy(), StrategySpec::DriftAware],
        reps,
        seed,
    )?;
    let row = comparison.rows[1].clone();
    Ok(DriftReport {
        drift_model: drift.to_string(),
        violates_independence: drift.violates_independence(),
        comparison,
        advantage: row.paired_diff_vs_greedy,
        advantage_stderr: row.paired_stderr,
        z: row.paired_z(),
    })
}
