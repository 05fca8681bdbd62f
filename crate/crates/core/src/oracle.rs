//! Exact certification on small discrete instances.
//!
//! Everything here is computed in exact rational arithmetic: path values are
//! dyadic (see [`crate::enumerate::EXACT_BITS`]) and probabilities are
//! integer numerators over a common denominator.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::{build_alignment, invert_alignment};
use crate::enumerate::{exact_units, units_to_rational, Atom, PathSpace, EXACT_BITS};
use crate::error::{Error, Result};
use crate::model::{PathEnsemble, ProcessModel, Schedule};
use crate::seeding::split;
use crate::selection::{greedy_strategy, run_selection, HistoryView, Strategy, StrategySpec};

const CHUNK: u64 = 2048;

/// What an exact value was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDescriptor {
    pub model: String,
    pub schedule: Schedule,
    pub strategy: String,
}

/// An exact expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactValue {
    pub value: BigRational,
    pub instance: InstanceDescriptor,
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

fn units_of(value: f64) -> BigInt {
    BigInt::from(exact_units(value).expect("enumerated paths are dyadic"))
}

fn open_space(model: &ProcessModel, s: &Schedule, cap: u64) -> Result<PathSpace> {
    PathSpace::new(model, s.n(), s.horizon(), cap)
}

fn weighted_sum(
    space: &PathSpace,
    value: impl Fn(&Atom) -> Result<BigInt> + Sync,
) -> Result<BigRational> {
    let partial: Vec<BigInt> = space
        .chunks(CHUNK)
        .into_par_iter()
        .map(|range| {
            space.atoms(range).try_fold(BigInt::zero(), |acc, atom| {
                let v = value(&atom)?;
                Ok(acc + BigInt::from(atom.weight) * v)
            })
        })
        .collect::<Result<_>>()?;
    let total: BigInt = partial.into_iter().sum();
    Ok(units_to_rational(total) / BigRational::from(BigInt::from(space.denominator().clone())))
}

/// `E[Alg(X)]` by enumeration of every atom.
pub fn exact_expected_value(
    model: &ProcessModel,
    s: &Schedule,
    alg: &dyn Strategy,
    cap: u64,
) -> Result<ExactValue> {
    let space = open_space(model, s, cap)?;
    let value = weighted_sum(&space, |atom| {
        Ok(units_of(run_selection(&atom.ensemble, s, alg)?.final_value))
    })?;
    Ok(ExactValue {
        value,
        instance: InstanceDescriptor {
            model: model.tag(),
            schedule: s.clone(),
            strategy: alg.id(),
        },
    })
}

/// [`exact_expected_value`] for several strategies over one enumeration.
pub fn exact_expected_values(
    model: &ProcessModel,
    s: &Schedule,
    algs: &[StrategySpec],
    cap: u64,
) -> Result<Vec<ExactValue>> {
    let space = open_space(model, s, cap)?;
    let partial: Vec<Vec<BigInt>> = space
        .chunks(CHUNK)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![BigInt::zero(); algs.len()];
            for atom in space.atoms(range) {
                let w = BigInt::from(atom.weight);
                for (slot, alg) in acc.iter_mut().zip(algs) {
                    let v = units_of(run_selection(&atom.ensemble, s, alg)?.final_value);
                    *slot += &w * v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let denom = BigRational::from(BigInt::from(space.denominator().clone()));
    Ok(algs
        .iter()
        .enumerate()
        .map(|(k, alg)| {
            let total: BigInt = partial.iter().map(|p| &p[k]).sum();
            ExactValue {
                value: units_to_rational(total) / &denom,
                instance: InstanceDescriptor {
                    model: model.tag(),
                    schedule: s.clone(),
                    strategy: alg.id(),
                },
            }
        })
        .collect())
}

/// All `k`-subsets of `items` in lexicographic order.
pub fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn go(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            go(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// How histories are memoized in backward induction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryKeying {
    /// Multiset of (alive, observed path): relabelings of exchangeable
    /// processes share one entry.
    #[default]
    Canonical,
    /// The history exactly as observed, process labels included.
    Ordered,
}

/// One argmax decision of the backward induction.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub stage: usize,
    /// Processes as `A(path)` (alive) or `E(path)` (eliminated), in key order.
    pub history: String,
    /// Positions in `history` that are kept.
    pub chosen: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecisionTable {
    pub entries: Vec<Decision>,
}

#[derive(Clone)]
struct Hist {
    paths: Vec<Vec<i64>>,
    alive: Vec<bool>,
}

struct Dp<'a> {
    space: &'a PathSpace,
    s: &'a Schedule,
    keying: HistoryKeying,
    memo: HashMap<Vec<i64>, BigInt>,
    decisions: Vec<Decision>,
}

impl Dp<'_> {
    /// Key and the process order it lists them in.
    fn key(&self, stage: usize, h: &Hist) -> (Vec<i64>, Vec<usize>) {
        let mut order: Vec<usize> = (0..h.paths.len()).collect();
        if self.keying == HistoryKeying::Canonical {
            order.sort_by(|&a, &b| (h.alive[b], &h.paths[a]).cmp(&(h.alive[a], &h.paths[b])));
        }
        let mut key = vec![stage as i64];
        for &i in &order {
            key.push(i64::from(h.alive[i]));
            key.push(h.paths[i].len() as i64);
            key.extend_from_slice(&h.paths[i]);
        }
        (key, order)
    }

    fn describe(&self, h: &Hist, order: &[usize]) -> String {
        let scale = (1u64 << EXACT_BITS) as f64;
        order
            .iter()
            .map(|&i| {
                let vals: Vec<String> = h.paths[i]
                    .iter()
                    .map(|&u| format!("{}", u as f64 / scale))
                    .collect();
                format!("{}({})", if h.alive[i] { 'A' } else { 'E' }, vals.join(" "))
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Optimal continuation value at stage `stage`, scaled by `2^EXACT_BITS`
    /// times the probability denominators of all later blocks.
    fn solve(&mut self, stage: usize, h: &Hist) -> BigInt {
        let alive: Vec<usize> = (0..h.paths.len()).filter(|&i| h.alive[i]).collect();
        if stage == self.s.stages() {
            return alive
                .iter()
                .map(|&i| *h.paths[i].last().expect("nonempty path"))
                .max()
                .map(BigInt::from)
                .expect("survivors remain");
        }
        let (key, order) = self.key(stage, h);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let keep = self.s.size(stage);
        let steps: Vec<usize> = self.s.block(stage + 1).collect();
        let mut best: Option<(BigInt, Vec<usize>)> = None;
        for subset in combinations(&alive, keep) {
            let mut total = BigInt::zero();
            let cells: Vec<(usize, usize)> = steps
                .iter()
                .flat_map(|&t| subset.iter().map(move |&i| (t, i)))
                .collect();
            let radix: Vec<usize> = cells
                .iter()
                .map(|&(t, _)| self.space.law(t).len())
                .collect();
            let mut digits = vec![0usize; cells.len()];
            loop {
                let mut child = h.clone();
                for (i, a) in child.alive.iter_mut().enumerate() {
                    *a = subset.contains(&i);
                }
                let mut weight = BigUint::one();
                for (&(t, i), &d) in cells.iter().zip(&digits) {
                    let inc = exact_units(self.space.law(t).support()[d]).expect("dyadic");
                    let last = *child.paths[i].last().expect("nonempty");
                    child.paths[i].push(last + inc);
                    weight *= self.space.step_numerator(t, d);
                }
                total += BigInt::from(weight) * self.solve(stage + 1, &child);
                // Odometer over cell outcomes.
                let mut c = 0;
                while c < digits.len() {
                    digits[c] += 1;
                    if digits[c] < radix[c] {
                        break;
                    }
                    digits[c] = 0;
                    c += 1;
                }
                if c == digits.len() {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                best = Some((total, subset));
            }
        }
        let (value, subset) = best.expect("at least one subset");
        let mut chosen: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(_, i)| subset.contains(i))
            .map(|(pos, _)| pos)
            .collect();
        chosen.sort_unstable();
        self.decisions.push(Decision {
            stage,
            history: self.describe(h, &order),
            chosen,
        });
        self.memo.insert(key, value.clone());
        value
    }
}

/// Maximum of `E[Alg(X)]` over every history-measurable strategy, by backward
/// induction over observed histories, with one argmax decision per
/// (canonical) reachable history.
pub fn dp_optimal_value(
    model: &ProcessModel,
    s: &Schedule,
    cap: u64,
) -> Result<(ExactValue, DecisionTable)> {
    dp_optimal_value_with(model, s, HistoryKeying::Canonical, cap)
}

pub fn dp_optimal_value_with(
    model: &ProcessModel,
    s: &Schedule,
    keying: HistoryKeying,
    cap: u64,
) -> Result<(ExactValue, DecisionTable)> {
    let space = open_space(model, s, cap)?;
    let mut dp = Dp {
        space: &space,
        s,
        keying,
        memo: HashMap::new(),
        decisions: Vec::new(),
    };
    let n = s.n();
    let t1 = s.time(1);
    let radix: Vec<usize> = (1..=t1)
        .flat_map(|t| std::iter::repeat_n(space.law(t).len(), n))
        .collect();
    let mut digits = vec![0usize; radix.len()];
    let mut total = BigInt::zero();
    loop {
        let mut h = Hist {
            paths: vec![vec![0i64]; n],
            alive: vec![true; n],
        };
        let mut weight = BigUint::one();
        for t in 1..=t1 {
            for i in 0..n {
                let d = digits[(t - 1) * n + i];
                let inc = exact_units(space.law(t).support()[d]).expect("dyadic");
                let last = *h.paths[i].last().expect("nonempty");
                h.paths[i].push(last + inc);
                weight *= space.step_numerator(t, d);
            }
        }
        total += BigInt::from(weight) * dp.solve(1, &h);
        let mut c = 0;
        while c < digits.len() {
            digits[c] += 1;
            if digits[c] < radix[c] {
                break;
            }
            digits[c] = 0;
            c += 1;
        }
        if c == digits.len() {
            break;
        }
    }
    // Denominator: first block over all N processes, block j+1 over n_j survivors.
    let mut denom = BigUint::one();
    for t in 1..=t1 {
        denom *= space.step_denominator(t).pow(n as u32);
    }
    for j in 1..s.stages() {
        for t in s.block(j + 1) {
            denom *= space.step_denominator(t).pow(s.size(j) as u32);
        }
    }
    let value = units_to_rational(total) / BigRational::from(BigInt::from(denom));
    let mut entries = dp.decisions;
    entries.sort_by(|a, b| (a.stage, &a.history).cmp(&(b.stage, &b.history)));
    Ok((
        ExactValue {
            value,
            instance: InstanceDescriptor {
                model: model.tag(),
                schedule: s.clone(),
                strategy: "dp_optimal".into(),
            },
        },
        DecisionTable { entries },
    ))
}

/// Result of [`exhaustive_strategy_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: BigRational,
    pub tried: u64,
}

/// A policy given as an explicit lookup table over decision histories.
struct TablePolicy<'a> {
    points: &'a HashMap<Vec<u64>, usize>,
    digits: &'a [usize],
    last_stage: usize,
}

impl Strategy for TablePolicy<'_> {
    fn id(&self) -> String {
        "table".into()
    }

    fn select(&self, view: &HistoryView<'_>, keep: usize) -> Vec<usize> {
        if view.stage() == self.last_stage {
            return greedy_strategy().select(view, keep);
        }
        let point = self.points[&view.fingerprint()];
        combinations(view.survivors(), keep).swap_remove(self.digits[point])
    }
}

/// Follows fixed choices for the first stages and records the view it is
/// shown at the next one.
struct Script<'a> {
    choices: &'a [Vec<usize>],
    seen: std::sync::Mutex<Option<(Vec<u64>, Vec<usize>)>>,
}

impl Strategy for Script<'_> {
    fn id(&self) -> String {
        "script".into()
    }

    fn select(&self, view: &HistoryView<'_>, keep: usize) -> Vec<usize> {
        match self.choices.get(view.stage() - 1) {
            Some(c) => c.clone(),
            None => {
                *self.seen.lock().expect("poisoned") =
                    Some((view.fingerprint(), view.survivors().to_vec()));
                view.survivors()[..keep].to_vec()
            }
        }
    }
}

/// Best exact expected value over every deterministic policy, by brute force.
///
/// Every map from reachable decision histories of stages `1..k-1` to legal
/// subsets is enumerated and scored by full atom enumeration. The final
/// stage sees the payoff it chooses, so it always takes the largest value.
pub fn exhaustive_strategy_search(
    model: &ProcessModel,
    s: &Schedule,
    cap: u64,
) -> Result<SearchResult> {
    let space = open_space(model, s, crate::enumerate::DEFAULT_ENUMERATION_CAP)?;
    let k = s.stages();
    let n = s.n();

    // Count decision points and policies before building anything.
    let mut points_at = 1f64;
    for t in 1..=s.time(1) {
        points_at *= (space.law(t).len() as f64).powi(n as i32);
    }
    let mut log_policies = 0f64;
    for j in 1..k {
        let choices = binomial(s.size(j - 1), s.size(j)) as f64;
        log_policies += points_at * choices.log2();
        let mut outcomes = 1f64;
        for t in s.block(j + 1) {
            outcomes *= (space.law(t).len() as f64).powi(s.size(j) as i32);
        }
        points_at *= choices * outcomes;
    }
    if log_policies > (cap as f64).log2() + 1e-9 {
        return Err(Error::SearchTooLarge {
            size: format!("2^{log_policies:.1}"),
            cap,
        });
    }

    // Enumerate decision histories stage by stage.
    let mut points: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut radix: Vec<usize> = Vec::new();
    let t1 = s.time(1);
    let mut frontier: Vec<(PathEnsemble, Vec<Vec<usize>>)> = Vec::new();
    let first: Vec<usize> = (1..=t1)
        .flat_map(|t| std::iter::repeat_n(space.law(t).len(), n))
        .collect();
    for_each_digits(&first, |d| {
        let mut x = PathEnsemble::zeros(n, s.horizon());
        for t in 1..=t1 {
            for i in 0..n {
                let v = x.get(i, t - 1) + space.law(t).support()[d[(t - 1) * n + i]];
                x.row_mut(i)[t] = v;
            }
        }
        frontier.push((x, Vec::new()));
    });
    for j in 1..k {
        let mut next = Vec::new();
        for (x, choices) in &frontier {
            let script = Script {
                choices,
                seen: std::sync::Mutex::new(None),
            };
            let mut run = crate::selection::SelectionRun::new(s);
            for _ in 0..j {
                run.step(x, &script)?;
            }
            let (fp, survivors) = script
                .seen
                .into_inner()
                .expect("poisoned")
                .expect("captured");
            let subsets = combinations(&survivors, s.size(j));
            radix.push(subsets.len());
            points.insert(fp, points.len());
            if j + 1 < k {
                let steps: Vec<usize> = s.block(j + 1).collect();
                for subset in subsets {
                    let cells: Vec<(usize, usize)> = steps
                        .iter()
                        .flat_map(|&t| subset.iter().map(move |&i| (t, i)))
                        .collect();
                    let r: Vec<usize> = cells.iter().map(|&(t, _)| space.law(t).len()).collect();
                    for_each_digits(&r, |d| {
                        let mut child = x.clone();
                        for (&(t, i), &dd) in cells.iter().zip(d) {
                            let v = child.get(i, t - 1) + space.law(t).support()[dd];
                            child.row_mut(i)[t] = v;
                        }
                        let mut c = choices.clone();
                        c.push(subset.clone());
                        next.push((child, c));
                    });
                }
            }
        }
        frontier = next;
    }

    let tried: u64 = radix.iter().map(|&r| r as u64).product();
    let atoms: Vec<Atom> = space.atoms(0..space.len()).collect();
    let denom = BigRational::from(BigInt::from(space.denominator().clone()));
    let best = (0..tried)
        .into_par_iter()
        .map(|policy| {
            let mut digits = Vec::with_capacity(radix.len());
            let mut rest = policy;
            for &r in &radix {
                digits.push((rest % r as u64) as usize);
                rest /= r as u64;
            }
            let table = TablePolicy {
                points: &points,
                digits: &digits,
                last_stage: k,
            };
            atoms.iter().try_fold(BigInt::zero(), |acc, atom| {
                let v = run_selection(&atom.ensemble, s, &table)?.final_value;
                Ok(acc + BigInt::from(atom.weight.clone()) * units_of(v))
            })
        })
        .try_reduce_with(|a, b| Ok(a.max(b)))
        .expect("at least one policy")?;
    Ok(SearchResult {
        best: units_to_rational(best) / denom,
        tried,
    })
}

fn for_each_digits(radix: &[usize], mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; radix.len()];
    loop {
        f(&digits);
        let mut c = 0;
        while c < digits.len() {
            digits[c] += 1;
            if digits[c] < radix[c] {
                break;
            }
            digits[c] = 0;
            c += 1;
        }
        if c == digits.len() {
            return;
        }
    }
}

/// `(A+C)(m) <= (B+C)(m)` for every `m`, where `(.)(m)` is the m-th largest
/// entry. Requires `A <= B` componentwise.
pub fn order_stat_lemma_check(a: &[f64], b: &[f64], c: &[f64]) -> Result<bool> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector lengths {}, {}, {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    if let Some(index) = a
        .iter()
        .zip(b)
        .position(|(x, y)| x.partial_cmp(y).is_none_or(|o| o.is_gt()))
    {
        return Err(Error::PreconditionViolated { index });
    }
    let sorted_sum = |v: &[f64]| {
        let mut s: Vec<f64> = v.iter().zip(c).map(|(x, y)| x + y).collect();
        s.sort_by(|p, q| q.total_cmp(p));
        s
    };
    let lo = sorted_sum(a);
    let hi = sorted_sum(b);
    Ok(lo.iter().zip(&hi).all(|(x, y)| x <= y))
}

/// A triple for which the order-statistic inequality failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCounterexample {
    pub trial: u64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSweep {
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    pub counterexamples: Vec<LemmaCounterexample>,
}

/// Random triple of length `k` with `a <= b`; half the trials draw small
/// integers so that ties are frequent.
pub fn lemma_triple(k: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ties = rng.random_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if ties {
            f64::from(rng.random_range(-3i32..=3))
        } else {
            rng.sample::<f64, _>(StandardNormal)
        }
    };
    let a: Vec<f64> = (0..k).map(|_| draw(&mut rng)).collect();
    let c: Vec<f64> = (0..k).map(|_| draw(&mut rng)).collect();
    let b = a
        .iter()
        .map(|&x| {
            if rng.random_bool(1.0 / 3.0) {
                x
            } else {
                x + draw(&mut rng).abs()
            }
        })
        .collect();
    (a, b, c)
}

/// Checks [`order_stat_lemma_check`] on `trials` random triples of length `k`.
pub fn lemma_sweep(k: usize, trials: u64, seed: u64) -> Result<LemmaSweep> {
    if k == 0 {
        return Err(Error::InvalidDimensions("lemma vectors need k >= 1".into()));
    }
    let results: Vec<Option<LemmaCounterexample>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (a, b, c) = lemma_triple(k, split(seed, trial));
            Ok(
                (!order_stat_lemma_check(&a, &b, &c)?).then_some(LemmaCounterexample {
                    trial,
                    a,
                    b,
                    c,
                }),
            )
        })
        .collect::<Result<_>>()?;
    Ok(LemmaSweep {
        k,
        trials,
        seed,
        counterexamples: results.into_iter().flatten().collect(),
    })
}

/// Exhaustive audit of the coupling over every atom of a discrete instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingAudit {
    pub strategy: String,
    pub atoms: u64,
    pub dominance_ok: u64,
    pub permutation_ok: u64,
    pub inversion_ok: u64,
    /// Every atom's probability equals that of its image.
    pub pushforward_ok: u64,
    /// Images are pairwise distinct atoms.
    pub bijective: bool,
    /// `E[Alg(X)]`.
    pub alg_value: BigRational,
    /// `E[greedy(φ(X))]`.
    pub coupled_greedy_value: BigRational,
    /// `E[greedy(X)]`.
    pub greedy_value: BigRational,
}

impl CouplingAudit {
    pub fn ok(&self) -> bool {
        self.dominance_ok == self.atoms
            && self.permutation_ok == self.atoms
            && self.inversion_ok == self.atoms
            && self.pushforward_ok == self.atoms
            && self.bijective
            && self.coupled_greedy_value == self.greedy_value
            && self.alg_value <= self.greedy_value
    }
}

pub fn audit_coupling(
    model: &ProcessModel,
    s: &Schedule,
    alg: &dyn Strategy,
    cap: u64,
) -> Result<CouplingAudit> {
    #[derive(Default)]
    struct Part {
        dominance_ok: u64,
        permutation_ok: u64,
        inversion_ok: u64,
        pushforward_ok: u64,
        images: Vec<Vec<u64>>,
        alg: BigInt,
        coupled: BigInt,
        greedy: BigInt,
    }

    let space = open_space(model, s, cap)?;
    let greedy = greedy_strategy();
    let parts: Vec<Part> = space
        .chunks(CHUNK)
        .into_par_iter()
        .map(|range| {
            let mut part = Part::default();
            for atom in space.atoms(range) {
                let w = build_alignment(&atom.ensemble, s, alg)?;
                part.dominance_ok += u64::from(w.dominance_report.ok());
                part.permutation_ok += u64::from(w.permutation_report.ok());
                part.inversion_ok += u64::from(invert_alignment(&w.y, s, alg)? == atom.ensemble);
                part.pushforward_ok += u64::from(space.weight(&w.y).as_ref() == Some(&atom.weight));
                part.images.push(w.y.bit_key());
                let weight = BigInt::from(atom.weight);
                part.alg += &weight * units_of(w.alg_trace.final_value);
                part.coupled += &weight * units_of(w.greedy_trace.final_value);
                part.greedy +=
                    &weight * units_of(run_selection(&atom.ensemble, s, &greedy)?.final_value);
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let denom = BigRational::from(BigInt::from(space.denominator().clone()));
    let mut images = HashSet::with_capacity(space.len() as usize);
    let mut audit = CouplingAudit {
        strategy: alg.id(),
        atoms: space.len(),
        dominance_ok: 0,
        permutation_ok: 0,
        inversion_ok: 0,
        pushforward_ok: 0,
        bijective: true,
        alg_value: BigRational::zero(),
        coupled_greedy_value: BigRational::zero(),
        greedy_value: BigRational::zero(),
    };
    let (mut alg_sum, mut coupled_sum, mut greedy_sum) =
        (BigInt::zero(), BigInt::zero(), BigInt::zero());
    for part in parts {
        audit.dominance_ok += part.dominance_ok;
        audit.permutation_ok += part.permutation_ok;
        audit.inversion_ok += part.inversion_ok;
        audit.pushforward_ok += part.pushforward_ok;
        for key in part.images {
            audit.bijective &= images.insert(key);
        }
        alg_sum += part.alg;
        coupled_sum += part.coupled;
        greedy_sum += part.greedy;
    }
    audit.alg_value = units_to_rational(alg_sum) / &denom;
    audit.coupled_greedy_value = units_to_rational(coupled_sum) / &denom;
    audit.greedy_value = units_to_rational(greedy_sum) / &denom;
    Ok(audit)
}
