//! The alignment coupling between an arbitrary strategy and greedy.
//!
//! Given a realization `X` and a deterministic strategy `Alg`, we build
//! `Y = φ(X)` block by block. `Y` equals `X` up to `t_1`. At each `t_j`
//! (`j < k`) every process of `X` is paired with one process of `Y`, and on
//! `(t_j, t_{j+1}]` the paired `Y` process replays the `X` process's
//! increments:
//!
//! * `Alg`'s survivors `Σ_j` pair with greedy-on-`Y` survivors `Σ*_j`, the
//!   r-th largest value at `t_j` with the r-th largest;
//! * the processes each run eliminated at stage `j` pair the same way, and
//!   that pairing is frozen for all later blocks.
//!
//! Pairings depend only on data up to `t_j`, so each block of `φ` is a row
//! permutation of increments chosen from the past: `φ` is a bijection that
//! preserves the law of i.i.d. independent-increment ensembles. By induction
//! the paired greedy survivor values dominate `Alg`'s at every stage.
//!
//! Within a block the paired `Y` path is written as `X` path plus the gap at
//! `t_j`. The gap is non-negative for survivor pairs, so floating-point
//! rounding can never make `Y` fall below its partner.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{PathEnsemble, Schedule};
use crate::selection::{
    greedy_strategy, order_desc, run_selection, SelectionRun, SelectionTrace, StageRecord, Strategy,
};

/// Which group a pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cohort {
    /// Survivors of stage `stage` (stage 0: every process).
    Survivor { stage: usize },
    /// Processes eliminated at stage `stage`.
    Eliminated { stage: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub cohort: Cohort,
    /// 1-based rank inside the cohort.
    pub rank: usize,
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cohort {
            Cohort::Survivor { stage } => write!(f, "S{stage}:{}", self.rank),
            Cohort::Eliminated { stage } => write!(f, "E{stage}:{}", self.rank),
        }
    }
}

/// Pairing used on block `stage`: `X_n` feeds `Y_{map[n]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPairing {
    pub stage: usize,
    pub map: Vec<usize>,
    pub keys: Vec<PairKey>,
}

impl BlockPairing {
    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(n, &m)| n == m)
    }

    pub fn is_bijection(&self) -> bool {
        let mut hit = vec![false; self.map.len()];
        for &m in &self.map {
            if m >= hit.len() || std::mem::replace(&mut hit[m], true) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingSequence {
    pub blocks: Vec<BlockPairing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCheckKind {
    /// Pair formed at `t_{j-1}`, evaluated at `t_j`.
    Carried,
    /// Survivors of stage `j` re-paired by rank at `t_j`.
    Reranked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub stage: usize,
    pub time: usize,
    pub kind: PairCheckKind,
    pub key: PairKey,
    pub x_process: usize,
    pub y_process: usize,
    pub x_value: f64,
    pub y_value: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub checks: Vec<PairCheck>,
    /// `Alg(X)`.
    pub alg_final: f64,
    /// `greedy(φ(X))`.
    pub greedy_final: f64,
    pub headline_ok: bool,
}

impl DominanceReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.ok).count() + usize::from(!self.headline_ok)
    }

    pub fn ok(&self) -> bool {
        self.violations() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub stage: usize,
    pub bijective: bool,
    /// Largest `|ΔY_{π(n)} - ΔX_n|` over the block.
    pub max_deviation: f64,
    pub rows_match: bool,
    /// Rebuilding from data truncated at `t_{j-1}` gives the same pairing.
    pub measurable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationReport {
    pub prefix_identical: bool,
    pub blocks: Vec<BlockCheck>,
}

impl PermutationReport {
    pub fn violations(&self) -> usize {
        usize::from(!self.prefix_identical)
            + self
                .blocks
                .iter()
                .filter(|b| !(b.bijective && b.rows_match && b.measurable))
                .count()
    }

    pub fn ok(&self) -> bool {
        self.violations() == 0
    }
}

/// `φ(X)` together with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct AlignmentWitness {
    pub x: PathEnsemble,
    pub y: PathEnsemble,
    pub pairing: PairingSequence,
    pub alg_trace: SelectionTrace,
    pub greedy_trace: SelectionTrace,
    pub dominance_report: DominanceReport,
    pub permutation_report: PermutationReport,
    measurable: Vec<bool>,
}

/// Relative tolerance when comparing replayed increments of float paths.
/// Enumerated (dyadic) ensembles always match exactly.
pub const ROW_TOLERANCE: f64 = 1e-12;

fn newly_eliminated(rec: &StageRecord) -> Vec<usize> {
    rec.observed
        .iter()
        .copied()
        .filter(|i| rec.survivors.binary_search(i).is_err())
        .collect()
}

/// Pairing for block `stage + 1`, formed at `t_stage`.
fn pair_at(
    stage: usize,
    time: usize,
    alg: &StageRecord,
    greedy: &StageRecord,
    x: &PathEnsemble,
    y: &PathEnsemble,
    frozen: &mut [Option<(usize, PairKey)>],
) -> BlockPairing {
    let n = x.n();
    let mut map = vec![usize::MAX; n];
    let mut keys = vec![
        PairKey {
            cohort: Cohort::Survivor { stage },
            rank: 0
        };
        n
    ];
    let xs = order_desc(&alg.survivors, |i| x.get(i, time));
    let ys = order_desc(&greedy.survivors, |i| y.get(i, time));
    for (r, (&xn, &ym)) in xs.iter().zip(&ys).enumerate() {
        map[xn] = ym;
        keys[xn] = PairKey {
            cohort: Cohort::Survivor { stage },
            rank: r + 1,
        };
    }
    let xe = order_desc(&newly_eliminated(alg), |i| x.get(i, time));
    let ye = order_desc(&newly_eliminated(greedy), |i| y.get(i, time));
    for (r, (&xn, &ym)) in xe.iter().zip(&ye).enumerate() {
        frozen[xn] = Some((
            ym,
            PairKey {
                cohort: Cohort::Eliminated { stage },
                rank: r + 1,
            },
        ));
    }
    for (xn, slot) in frozen.iter().enumerate() {
        if let Some((ym, key)) = slot {
            map[xn] = *ym;
            keys[xn] = *key;
        }
    }
    BlockPairing {
        stage: stage + 1,
        map,
        keys,
    }
}

fn first_block(alg_first: &StageRecord) -> BlockPairing {
    let n = alg_first.indices.len();
    BlockPairing {
        stage: 1,
        map: (0..n).collect(),
        keys: alg_first
            .indices
            .iter()
            .map(|&rank| PairKey {
                cohort: Cohort::Survivor { stage: 0 },
                rank,
            })
            .collect(),
    }
}

/// Writes block `stage` of `dst` from `src` through `pairing`: every paired
/// destination row follows its source row shifted by their gap at the block
/// start. `forward` maps source `n` to destination `map[n]`; otherwise the
/// roles are swapped.
fn replay_block(
    schedule: &Schedule,
    pairing: &BlockPairing,
    src: &PathEnsemble,
    dst: &mut PathEnsemble,
    forward: bool,
) {
    let start = schedule.time(pairing.stage - 1);
    for (n, &m) in pairing.map.iter().enumerate() {
        let (from, to) = if forward { (n, m) } else { (m, n) };
        let gap = dst.get(to, start) - src.get(from, start);
        for t in schedule.block(pairing.stage) {
            let v = src.get(from, t) + gap;
            dst.row_mut(to)[t] = v;
        }
    }
}

struct Construction {
    y: PathEnsemble,
    pairing: PairingSequence,
    alg_trace: SelectionTrace,
    greedy_trace: SelectionTrace,
}

fn ensure_deterministic(alg: &dyn Strategy) -> Result<()> {
    if alg.is_deterministic() {
        Ok(())
    } else {
        Err(Error::NonDeterministicStrategy(alg.id()))
    }
}

fn construct(x: &PathEnsemble, schedule: &Schedule, alg: &dyn Strategy) -> Result<Construction> {
    x.matches(schedule)?;
    let greedy = greedy_strategy();
    let alg_trace = run_selection(x, schedule, alg)?;
    let mut y = x.clone();
    y.seed = None;
    let mut greedy_run = SelectionRun::new(schedule);
    greedy_run.step(&y, &greedy)?;
    let mut blocks = vec![first_block(&alg_trace.stages[0])];
    let mut frozen = vec![None; x.n()];
    for j in 1..schedule.stages() {
        let pairing = pair_at(
            j,
            schedule.time(j),
            &alg_trace.stages[j - 1],
            &greedy_run.stages()[j - 1],
            x,
            &y,
            &mut frozen,
        );
        replay_block(schedule, &pairing, x, &mut y, true);
        blocks.push(pairing);
        greedy_run.step(&y, &greedy)?;
    }
    let greedy_trace = greedy_run.finish(&y, &greedy);
    Ok(Construction {
        y,
        pairing: PairingSequence { blocks },
        alg_trace,
        greedy_trace,
    })
}

/// Builds `φ(X)` for `alg` and audits it.
pub fn build_alignment(
    x: &PathEnsemble,
    schedule: &Schedule,
    alg: &dyn Strategy,
) -> Result<AlignmentWitness> {
    ensure_deterministic(alg)?;
    let c = construct(x, schedule, alg)?;

    // Pairing of block j must be recomputable from data up to t_{j-1}:
    // freeze every path after t_{j-1} and rebuild.
    let mut measurable = vec![true];
    for j in 2..=schedule.stages() {
        let cut = schedule.time(j - 1);
        let mut truncated = x.clone();
        for i in 0..x.n() {
            let row = truncated.row_mut(i);
            let last = row[cut];
            row[cut + 1..].fill(last);
        }
        let again = construct(&truncated, schedule, alg)?;
        measurable.push(again.pairing.blocks[j - 1] == c.pairing.blocks[j - 1]);
    }

    let mut w = AlignmentWitness {
        x: x.clone(),
        y: c.y,
        pairing: c.pairing,
        alg_trace: c.alg_trace,
        greedy_trace: c.greedy_trace,
        dominance_report: DominanceReport {
            checks: Vec::new(),
            alg_final: f64::NAN,
            greedy_final: f64::NAN,
            headline_ok: false,
        },
        permutation_report: PermutationReport {
            prefix_identical: false,
            blocks: Vec::new(),
        },
        measurable,
    };
    w.dominance_report = check_pairwise_dominance(&w, schedule);
    w.permutation_report = check_block_permutation(&w, schedule);
    Ok(w)
}

/// Recovers `X` from `Y = φ(X)`.
///
/// Stage by stage: `X` equals `Y` up to `t_1`; once `X` is known up to `t_j`,
/// both runs and hence the pairing of block `j+1` are known, so the block's
/// `X` rows are read off their `Y` partners.
pub fn invert_alignment(
    y: &PathEnsemble,
    schedule: &Schedule,
    alg: &dyn Strategy,
) -> Result<PathEnsemble> {
    ensure_deterministic(alg)?;
    y.matches(schedule)?;
    let greedy = greedy_strategy();
    let mut x = y.clone();
    let mut alg_run = SelectionRun::new(schedule);
    let mut greedy_run = SelectionRun::new(schedule);
    alg_run.step(&x, alg)?;
    greedy_run.step(y, &greedy)?;
    let mut frozen = vec![None; y.n()];
    for j in 1..schedule.stages() {
        let pairing = pair_at(
            j,
            schedule.time(j),
            &alg_run.stages()[j - 1],
            &greedy_run.stages()[j - 1],
            &x,
            y,
            &mut frozen,
        );
        replay_block(schedule, &pairing, y, &mut x, false);
        alg_run.step(&x, alg)?;
        greedy_run.step(y, &greedy)?;
    }
    Ok(x)
}

/// Checks `Y_m(t_j) >= X_n(t_j)` for every survivor pair and the headline
/// `Alg(X) <= greedy(φ(X))`.
pub fn check_pairwise_dominance(w: &AlignmentWitness, schedule: &Schedule) -> DominanceReport {
    let mut checks = Vec::new();
    for j in 1..=schedule.stages() {
        let time = schedule.time(j);
        let block = &w.pairing.blocks[j - 1];
        for (n, (&m, key)) in block.map.iter().zip(&block.keys).enumerate() {
            if key.cohort != (Cohort::Survivor { stage: j - 1 }) {
                continue;
            }
            let (xv, yv) = (w.x.get(n, time), w.y.get(m, time));
            checks.push(PairCheck {
                stage: j,
                time,
                kind: PairCheckKind::Carried,
                key: *key,
                x_process: n,
                y_process: m,
                x_value: xv,
                y_value: yv,
                ok: yv >= xv,
            });
        }
        let xs = order_desc(&w.alg_trace.stages[j - 1].survivors, |i| w.x.get(i, time));
        let ys = order_desc(&w.greedy_trace.stages[j - 1].survivors, |i| {
            w.y.get(i, time)
        });
        for (r, (&n, &m)) in xs.iter().zip(&ys).enumerate() {
            let (xv, yv) = (w.x.get(n, time), w.y.get(m, time));
            checks.push(PairCheck {
                stage: j,
                time,
                kind: PairCheckKind::Reranked,
                key: PairKey {
                    cohort: Cohort::Survivor { stage: j },
                    rank: r + 1,
                },
                x_process: n,
                y_process: m,
                x_value: xv,
                y_value: yv,
                ok: yv >= xv,
            });
        }
    }
    let alg_final = w.alg_trace.final_value;
    let greedy_final = w.greedy_trace.final_value;
    DominanceReport {
        checks,
        alg_final,
        greedy_final,
        headline_ok: alg_final <= greedy_final,
    }
}

/// Checks that each block of `Y` is `X`'s increment rows reordered by a
/// bijection chosen from data before the block.
pub fn check_block_permutation(w: &AlignmentWitness, schedule: &Schedule) -> PermutationReport {
    let t1 = schedule.time(1);
    let prefix_identical = (0..w.x.n()).all(|i| w.x.row(i)[..=t1] == w.y.row(i)[..=t1]);
    let scale =
        w.x.values()
            .iter()
            .chain(w.y.values())
            .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let blocks = w
        .pairing
        .blocks
        .iter()
        .map(|b| {
            let mut max_deviation = 0.0_f64;
            if b.is_bijection() {
                for (n, &m) in b.map.iter().enumerate() {
                    for t in schedule.block(b.stage) {
                        let dx = w.x.get(n, t) - w.x.get(n, t - 1);
                        let dy = w.y.get(m, t) - w.y.get(m, t - 1);
                        max_deviation = max_deviation.max((dx - dy).abs());
                    }
                }
            }
            BlockCheck {
                stage: b.stage,
                bijective: b.is_bijection(),
                max_deviation,
                rows_match: b.is_bijection() && max_deviation <= ROW_TOLERANCE * scale,
                measurable: w.measurable.get(b.stage - 1).copied().unwrap_or(false),
            }
        })
        .collect();
    PermutationReport {
        prefix_identical,
        blocks,
    }
}
