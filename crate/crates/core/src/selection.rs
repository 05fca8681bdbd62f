//! Staged selection over an ensemble.
//!
//! A strategy is called once per stage with a [`HistoryView`] of what has been
//! observed so far and must return exactly `n_j` of the current survivors.
//! The engine records survivor sets and the temporal index system: at stage
//! `j` the processes still in play are ranked by their value at `t_j` and
//! labelled `1..`, while processes already eliminated keep their last label.
//!
//! Process ids are 0-based; ranks and temporal indices are 1-based with rank
//! 1 for the largest value. Ties go to the smaller process id everywhere.

use std::cmp::Ordering;

use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PathEnsemble, Schedule};
use crate::seeding::mix64;

/// Tie rule for equal values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// The smaller position wins the better rank.
    #[default]
    LowerIdFirst,
    HigherIdFirst,
}

/// Rank of every entry, 1 for the largest.
pub fn rank_desc(values: &[f64], tie: TieBreak) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b].total_cmp(&values[a]).then_with(|| match tie {
            TieBreak::LowerIdFirst => a.cmp(&b),
            TieBreak::HigherIdFirst => b.cmp(&a),
        })
    });
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

fn desc_then_id(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// `ids` sorted best first by `score`, smaller id first on ties.
pub fn order_desc(ids: &[usize], score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = ids.iter().map(|&i| (i, score(i))).collect();
    scored.sort_by(|&a, &b| desc_then_id(a, b));
    scored.into_iter().map(|(i, _)| i).collect()
}

fn top(ids: &[usize], keep: usize, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = order_desc(ids, score).into_iter().take(keep).collect();
    chosen.sort_unstable();
    chosen
}

/// What a strategy may look at when deciding stage `j`.
///
/// Survivors of stage `j-1` are visible up to `t_j`; a process eliminated at
/// stage `s` is visible only up to `t_s`.
#[derive(Debug)]
pub struct HistoryView<'a> {
    stage: usize,
    schedule: &'a Schedule,
    survivors: &'a [usize],
    rows: Vec<&'a [f64]>,
}

impl<'a> HistoryView<'a> {
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// `t_j`.
    pub fn time(&self) -> usize {
        self.schedule.time(self.stage)
    }

    pub fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    /// Steps left after `t_j`.
    pub fn remaining(&self) -> usize {
        self.horizon() - self.time()
    }

    pub fn schedule(&self) -> &Schedule {
        self.schedule
    }

    pub fn n_processes(&self) -> usize {
        self.rows.len()
    }

    /// Survivors of the previous stage, ascending.
    pub fn survivors(&self) -> &[usize] {
        self.survivors
    }

    /// Observed prefix of process `i`.
    pub fn path(&self, i: usize) -> &'a [f64] {
        self.rows[i]
    }

    pub fn value_at(&self, i: usize, t: usize) -> Option<f64> {
        self.rows.get(i).and_then(|r| r.get(t)).copied()
    }

    /// Value at `t_j` of a survivor.
    pub fn current(&self, i: usize) -> f64 {
        self.rows[i][self.time()]
    }

    /// Bit-exact encoding of everything visible, for table lookups.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(2 + self.survivors.len() + self.rows.len() * 4);
        key.push(self.stage as u64);
        key.push(self.survivors.len() as u64);
        key.extend(self.survivors.iter().map(|&i| i as u64));
        for row in &self.rows {
            key.push(row.len() as u64);
            key.extend(row.iter().map(|v| (v + 0.0).to_bits()));
        }
        key
    }
}

/// A selection rule `f_j`: from the visible history, keep `keep` survivors.
pub trait Strategy: Send + Sync {
    fn id(&self) -> String;

    fn select(&self, view: &HistoryView<'_>, keep: usize) -> Vec<usize>;

    /// Whether `select` is a pure function of its inputs.
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Built-in strategies, selectable by name in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// Keep the largest current values.
    Greedy,
    /// Keep the smallest current values.
    AntiGreedy,
    /// Uniformly random subset, seeded by `aux_seed`, the stage and the
    /// survivor ids. Values are left out of the seed so that sub-ulp noise
    /// cannot change the choice.
    /// Without a seed it draws from OS entropy and is not deterministic.
    RandomFixed {
        #[serde(default)]
        aux_seed: Option<u64>,
    },
    /// Greedy on the values at the previous observation time.
    LaggedGreedy,
    /// Current value plus the median observed increment times remaining steps.
    DriftAware,
}

pub fn greedy_strategy() -> StrategySpec {
    StrategySpec::Greedy
}

pub const DEFAULT_AUX_SEED: u64 = 0x5eed;

/// Comparison strategies for greedy.
pub fn baseline_strategies() -> Vec<StrategySpec> {
    vec![
        StrategySpec::AntiGreedy,
        StrategySpec::RandomFixed {
            aux_seed: Some(DEFAULT_AUX_SEED),
        },
        StrategySpec::LaggedGreedy,
        StrategySpec::DriftAware,
    ]
}

/// Greedy followed by every baseline.
pub fn full_catalog() -> Vec<StrategySpec> {
    let mut all = vec![greedy_strategy()];
    all.extend(baseline_strategies());
    all
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

impl Strategy for StrategySpec {
    fn id(&self) -> String {
        match self {
            Self::Greedy => "greedy".into(),
            Self::AntiGreedy => "anti_greedy".into(),
            Self::RandomFixed { aux_seed: Some(s) } => format!("random_fixed({s})"),
            Self::RandomFixed { aux_seed: None } => "random_fixed(unseeded)".into(),
            Self::LaggedGreedy => "lagged_greedy".into(),
            Self::DriftAware => "drift_aware".into(),
        }
    }

    fn select(&self, view: &HistoryView<'_>, keep: usize) -> Vec<usize> {
        let survivors = view.survivors();
        match self {
            Self::Greedy => top(survivors, keep, |i| view.current(i)),
            Self::AntiGreedy => {
                let order = order_desc(survivors, |i| view.current(i));
                let mut chosen = order[order.len() - keep..].to_vec();
                chosen.sort_unstable();
                chosen
            }
            Self::RandomFixed { aux_seed } => {
                let mut rng = match aux_seed {
                    Some(seed) => {
                        let mut h = mix64(*seed ^ mix64(view.stage() as u64));
                        for &i in survivors {
                            h = mix64(h ^ i as u64);
                        }
                        ChaCha8Rng::seed_from_u64(h)
                    }
                    None => ChaCha8Rng::from_os_rng(),
                };
                let mut chosen: Vec<usize> = index::sample(&mut rng, survivors.len(), keep)
                    .into_iter()
                    .map(|k| survivors[k])
                    .collect();
                chosen.sort_unstable();
                chosen
            }
            Self::LaggedGreedy => {
                let prev = view.schedule().time(view.stage() - 1);
                top(survivors, keep, |i| view.path(i)[prev])
            }
            Self::DriftAware => {
                let remaining = view.remaining() as f64;
                let t = view.time();
                top(survivors, keep, |i| {
                    let path = view.path(i);
                    let mut steps: Vec<f64> = path[..=t].windows(2).map(|w| w[1] - w[0]).collect();
                    let current = path[t];
                    if remaining == 0.0 {
                        current
                    } else {
                        current + median(&mut steps) * remaining
                    }
                })
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        !matches!(self, Self::RandomFixed { aux_seed: None })
    }
}

/// Outcome of one stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    /// 1-based stage `j`.
    pub stage: usize,
    /// `t_j`.
    pub time: usize,
    /// `W_{j-1}`: processes ranked at this stage, ascending.
    pub observed: Vec<usize>,
    /// `Σ_j = W_j`, ascending.
    pub survivors: Vec<usize>,
    /// `L_j`: every process not in `Σ_j`, ascending.
    pub eliminated: Vec<usize>,
    /// Temporal index of every process after this stage.
    pub indices: Vec<usize>,
    /// Value at `t_j` for observed processes.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub strategy: String,
    pub stages: Vec<StageRecord>,
    pub final_index: usize,
    pub final_value: f64,
}

impl SelectionTrace {
    /// Stage at which process `i` was eliminated, `None` for the winner.
    pub fn elimination_stage(&self, i: usize) -> Option<usize> {
        self.stages
            .iter()
            .find(|r| !r.survivors.contains(&i))
            .map(|r| r.stage)
    }
}

/// Temporal indices after stage `stage`, given the records of earlier stages.
///
/// `values_at_tj` has one entry per process; only the processes observed at
/// this stage are read.
pub fn assign_temporal_indices(
    prior: &[StageRecord],
    stage: usize,
    values_at_tj: &[f64],
) -> Result<Vec<usize>> {
    let expected = prior.len() + 1;
    if stage != expected {
        return Err(Error::StageOutOfOrder {
            expected,
            got: stage,
        });
    }
    let (observed, mut indices): (Vec<usize>, Vec<usize>) = match prior.last() {
        None => (
            (0..values_at_tj.len()).collect(),
            vec![0; values_at_tj.len()],
        ),
        Some(last) => {
            if last.indices.len() != values_at_tj.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} values for {} processes",
                    values_at_tj.len(),
                    last.indices.len()
                )));
            }
            (last.survivors.clone(), last.indices.clone())
        }
    };
    for (r, i) in order_desc(&observed, |i| values_at_tj[i])
        .into_iter()
        .enumerate()
    {
        indices[i] = r + 1;
    }
    Ok(indices)
}

/// Stage-by-stage execution of one strategy.
///
/// The ensemble is passed at each step so that callers reconstructing a path
/// incrementally (as the inverse coupling does) can extend it between stages;
/// only data visible at the current stage is ever read.
#[derive(Debug, Clone)]
pub struct SelectionRun<'s> {
    schedule: &'s Schedule,
    stages: Vec<StageRecord>,
    survivors: Vec<usize>,
    visible_until: Vec<usize>,
}

impl<'s> SelectionRun<'s> {
    pub fn new(schedule: &'s Schedule) -> Self {
        Self {
            schedule,
            stages: Vec::with_capacity(schedule.stages()),
            survivors: (0..schedule.n()).collect(),
            visible_until: vec![0; schedule.n()],
        }
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    pub fn next_stage_number(&self) -> usize {
        self.stages.len() + 1
    }

    pub fn is_complete(&self) -> bool {
        self.stages.len() == self.schedule.stages()
    }

    /// Current survivors (`Σ_{j}` after the last completed stage).
    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    pub fn step(&mut self, x: &PathEnsemble, alg: &dyn Strategy) -> Result<&StageRecord> {
        let stage = self.next_stage_number();
        let time = self.schedule.time(stage);
        let keep = self.schedule.size(stage);
        for &i in &self.survivors {
            self.visible_until[i] = time;
        }
        let rows = (0..x.n())
            .map(|i| &x.row(i)[..=self.visible_until[i]])
            .collect();
        let view = HistoryView {
            stage,
            schedule: self.schedule,
            survivors: &self.survivors,
            rows,
        };
        let mut chosen = alg.select(&view, keep);
        chosen.sort_unstable();
        let violation = |reason: String| Error::StrategyViolation {
            strategy: alg.id(),
            stage,
            reason,
        };
        if chosen.len() != keep {
            return Err(violation(format!(
                "returned {} processes, expected {keep}",
                chosen.len()
            )));
        }
        if chosen.windows(2).any(|w| w[0] == w[1]) {
            return Err(violation("returned a process twice".into()));
        }
        if let Some(bad) = chosen
            .iter()
            .find(|i| self.survivors.binary_search(i).is_err())
        {
            return Err(violation(format!(
                "process {bad} is not a current survivor"
            )));
        }

        let values_at: Vec<f64> = (0..x.n()).map(|i| x.get(i, time)).collect();
        let indices = assign_temporal_indices(&self.stages, stage, &values_at)?;
        let observed = std::mem::take(&mut self.survivors);
        let values = (0..x.n())
            .map(|i| observed.binary_search(&i).is_ok().then(|| values_at[i]))
            .collect();
        let eliminated = (0..x.n())
            .filter(|i| chosen.binary_search(i).is_err())
            .collect();
        self.survivors = chosen.clone();
        self.stages.push(StageRecord {
            stage,
            time,
            observed,
            survivors: chosen,
            eliminated,
            indices,
            values,
        });
        Ok(self.stages.last().expect("just pushed"))
    }

    pub fn finish(self, x: &PathEnsemble, alg: &dyn Strategy) -> SelectionTrace {
        assert!(self.is_complete(), "selection run not complete");
        let final_index = self.survivors[0];
        SelectionTrace {
            strategy: alg.id(),
            final_value: x.get(final_index, self.schedule.horizon()),
            final_index,
            stages: self.stages,
        }
    }
}

/// Runs `alg` through every stage of `schedule` on realization `x`.
pub fn run_selection(
    x: &PathEnsemble,
    schedule: &Schedule,
    alg: &dyn Strategy,
) -> Result<SelectionTrace> {
    x.matches(schedule)?;
    let mut run = SelectionRun::new(schedule);
    while !run.is_complete() {
        run.step(x, alg)?;
    }
    Ok(run.finish(x, alg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    fn instance_a() -> Schedule {
        Schedule::new(&[1, 2], &[2, 1], 3, 2).unwrap()
    }

    /// t1 values (1, -1, -1), block-2 increments (+1, -1, +1).
    fn realization_a() -> PathEnsemble {
        PathEnsemble::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![0.0, -1.0, -2.0],
            vec![0.0, -1.0, 0.0],
        ])
        .unwrap()
    }

    fn view_over<'a>(
        schedule: &'a Schedule,
        survivors: &'a [usize],
        rows: &'a [Vec<f64>],
        stage: usize,
    ) -> HistoryView<'a> {
        HistoryView {
            stage,
            schedule,
            survivors,
            rows: rows.iter().map(Vec::as_slice).collect(),
        }
    }

    #[test]
    fn ranks() {
        assert_eq!(
            rank_desc(&[3.0, 1.0, 2.0], TieBreak::default()),
            vec![1, 3, 2]
        );
        assert_eq!(rank_desc(&[1.0, 1.0], TieBreak::default()), vec![1, 2]);
        assert_eq!(rank_desc(&[1.0, 1.0], TieBreak::HigherIdFirst), vec![2, 1]);
        let v = [0.5, -2.0, 7.0, 3.0];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let a = rank_desc(&v, TieBreak::default());
        let b = rank_desc(&neg, TieBreak::default());
        assert!(a.iter().zip(&b).all(|(x, y)| x + y == v.len() + 1));
    }

    #[test]
    fn temporal_indices_hand_trace() {
        let x = realization_a();
        let s = instance_a();
        let t1 = [1.0, -1.0, -1.0];
        let idx1 = assign_temporal_indices(&[], 1, &t1).unwrap();
        assert_eq!(idx1, vec![1, 2, 3]);

        let trace = run_selection(&x, &s, &StrategySpec::AntiGreedy).unwrap();
        let stage1 = &trace.stages[0];
        assert_eq!(stage1.survivors, vec![1, 2]);
        let idx2 = assign_temporal_indices(&trace.stages[..1], 2, &[f64::NAN, -2.0, 0.0]).unwrap();
        assert_eq!(idx2, vec![1, 2, 1]);
        assert!(matches!(
            assign_temporal_indices(&trace.stages[..1], 3, &[0.0; 3]),
            Err(Error::StageOutOfOrder {
                expected: 2,
                got: 3
            })
        ));
        assert_eq!(
            assign_temporal_indices(&[], 1, &[0.2, 0.9, -4.0]).unwrap(),
            vec![2, 1, 3]
        );
    }

    #[test]
    fn greedy_and_anti_greedy_on_instance_a() {
        let x = realization_a();
        let s = instance_a();
        let g = run_selection(&x, &s, &greedy_strategy()).unwrap();
        assert_eq!(g.stages[0].survivors, vec![0, 1]);
        assert_eq!(g.stages[0].eliminated, vec![2]);
        assert_eq!(g.final_index, 0);
        assert_eq!(g.final_value, 2.0);

        let a = run_selection(&x, &s, &StrategySpec::AntiGreedy).unwrap();
        assert_eq!(a.stages[0].survivors, vec![1, 2]);
        assert_eq!(a.final_index, 1);
        assert_eq!(a.final_value, -2.0);
        assert_eq!(a.elimination_stage(0), Some(1));
        assert_eq!(a.elimination_stage(2), Some(2));
        assert_eq!(a.elimination_stage(1), None);
    }

    #[test]
    fn single_stage_greedy_takes_the_maximum() {
        let s = Schedule::new(&[2], &[1], 3, 2).unwrap();
        let x = PathEnsemble::from_rows(&[
            vec![0.0, 1.0, 0.5],
            vec![0.0, -1.0, 3.0],
            vec![0.0, 2.0, 1.0],
        ])
        .unwrap();
        let t = run_selection(&x, &s, &greedy_strategy()).unwrap();
        assert_eq!((t.final_index, t.final_value), (1, 3.0));
    }

    #[test]
    fn strategy_choices_on_simple_values() {
        let s = Schedule::new(&[1, 2], &[2, 1], 3, 2).unwrap();
        let rows = vec![vec![0.0, 5.0], vec![0.0, 2.0], vec![0.0, 4.0]];
        let survivors = [0, 1, 2];
        let v = view_over(&s, &survivors, &rows, 1);
        assert_eq!(StrategySpec::Greedy.select(&v, 2), vec![0, 2]);
        assert_eq!(StrategySpec::AntiGreedy.select(&v, 2), vec![1, 2]);
        assert_eq!(StrategySpec::LaggedGreedy.select(&v, 2), vec![0, 1]);

        let flat = vec![vec![0.0, 1.0]; 3];
        let v = view_over(&s, &survivors, &flat, 1);
        assert_eq!(StrategySpec::Greedy.select(&v, 2), vec![0, 1]);
    }

    #[test]
    fn random_fixed_is_reproducible_given_aux_seed() {
        let s = Schedule::new(&[1, 2], &[3, 1], 6, 2).unwrap();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![0.0, i as f64 * 0.5 - 1.0]).collect();
        let survivors: Vec<usize> = (0..6).collect();
        let v = view_over(&s, &survivors, &rows, 1);
        let r = StrategySpec::RandomFixed { aux_seed: Some(42) };
        let first = r.select(&v, 3);
        assert_eq!(first.len(), 3);
        assert_eq!(r.select(&v, 3), first);
        assert!(r.is_deterministic());
        assert!(!StrategySpec::RandomFixed { aux_seed: None }.is_deterministic());
    }

    #[test]
    fn drift_aware_with_no_remaining_steps_matches_greedy() {
        let s = Schedule::new(&[1, 3], &[2, 1], 3, 3).unwrap();
        let rows = vec![
            vec![0.0, 1.0, 5.0, 6.0],
            vec![0.0, 3.0, 3.5, 7.0],
            vec![0.0, -1.0, 0.0, 1.0],
        ];
        let survivors = [0, 1];
        let v = view_over(&s, &survivors, &rows, 2);
        assert_eq!(v.remaining(), 0);
        assert_eq!(
            StrategySpec::DriftAware.select(&v, 1),
            StrategySpec::Greedy.select(&v, 1)
        );
    }

    #[test]
    fn drift_aware_prefers_steady_climbers() {
        let s = Schedule::new(&[3, 10], &[2, 1], 3, 10).unwrap();
        // Process 0: one lucky jump, drifting down. Process 1: steady +1.
        let rows = vec![
            vec![0.0, -1.0, 4.0, 3.0],
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0.0, -1.0, -2.0, -3.0],
        ];
        let survivors = [0, 1, 2];
        let v = view_over(&s, &survivors, &rows, 1);
        assert_eq!(StrategySpec::Greedy.select(&v, 1), vec![0]);
        assert_eq!(StrategySpec::DriftAware.select(&v, 1), vec![1]);
    }

    struct Bad(Vec<usize>);
    impl Strategy for Bad {
        fn id(&self) -> String {
            "bad".into()
        }
        fn select(&self, _: &HistoryView<'_>, _: usize) -> Vec<usize> {
            self.0.clone()
        }
    }

    #[test]
    fn contract_violations_abort() {
        let x = realization_a();
        let s = instance_a();
        for bad in [vec![0], vec![0, 0], vec![0, 7]] {
            assert!(matches!(
                run_selection(&x, &s, &Bad(bad)),
                Err(Error::StrategyViolation { stage: 1, .. })
            ));
        }
        // Stage 2 demands a subset of {0, 1}.
        assert!(matches!(
            run_selection(&x, &s, &Bad(vec![0, 1])),
            Err(Error::StrategyViolation { stage: 2, .. })
        ));
        let wrong = Schedule::new(&[1, 2], &[2, 1], 4, 2).unwrap();
        assert!(matches!(
            run_selection(&x, &wrong, &greedy_strategy()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    /// Records everything it can see, then behaves like anti-greedy.
    struct Probe(Mutex<Vec<(usize, Vec<usize>)>>);
    impl Strategy for Probe {
        fn id(&self) -> String {
            "probe".into()
        }
        fn select(&self, view: &HistoryView<'_>, keep: usize) -> Vec<usize> {
            let lens = (0..view.n_processes())
                .map(|i| view.path(i).len())
                .collect();
            self.0.lock().unwrap().push((view.stage(), lens));
            assert_eq!(
                view.value_at(0, view.time()),
                if view.stage() == 1 { Some(1.0) } else { None }
            );
            StrategySpec::AntiGreedy.select(view, keep)
        }
    }

    #[test]
    fn eliminated_values_are_hidden() {
        let x = realization_a();
        let s = instance_a();
        let probe = Probe(Mutex::new(Vec::new()));
        run_selection(&x, &s, &probe).unwrap();
        let seen = probe.0.into_inner().unwrap();
        assert_eq!(seen, vec![(1, vec![2, 2, 2]), (2, vec![2, 3, 3])]);
    }

    #[test]
    fn trace_invariants_hold_for_catalog() {
        let s = Schedule::new(&[1, 3, 4, 6], &[5, 3, 2, 1], 7, 6).unwrap();
        let m = crate::model::ProcessModel::from(
            crate::model::IncrementModel::gaussian(0.0, 1.0).unwrap(),
        );
        for seed in 0..20 {
            let x = crate::model::sample_ensemble(&m, 7, 6, seed).unwrap();
            for alg in full_catalog() {
                let t = run_selection(&x, &s, &alg).unwrap();
                let mut prev: Vec<usize> = (0..7).collect();
                for (j, rec) in t.stages.iter().enumerate() {
                    assert_eq!(rec.survivors.len(), s.sizes()[j]);
                    assert!(rec.survivors.iter().all(|i| prev.contains(i)));
                    let mut labels: Vec<usize> =
                        rec.observed.iter().map(|&i| rec.indices[i]).collect();
                    labels.sort_unstable();
                    assert_eq!(labels, (1..=prev.len()).collect::<Vec<_>>());
                    if j > 0 {
                        let before = &t.stages[j - 1];
                        for i in &before.eliminated {
                            assert_eq!(rec.indices[*i], before.indices[*i]);
                        }
                    }
                    if alg == StrategySpec::Greedy {
                        let top: Vec<usize> = (0..7)
                            .filter(|&i| {
                                rec.observed.contains(&i) && rec.indices[i] <= rec.survivors.len()
                            })
                            .collect();
                        assert_eq!(top, rec.survivors);
                    }
                    prev = rec.survivors.clone();
                }
            }
        }
    }
}
