//! Increment laws, observation schedules and path ensembles.
//!
//! A realization is an [`PathEnsemble`]: `N` value paths on steps `0..=T`,
//! each starting at 0. Increments `X_i(t) - X_i(t-1)` are drawn from an
//! [`IncrementModel`], independently across processes and steps, unless the
//! ensemble comes from a [`DriftModel`], which deliberately breaks that.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::seeding::CellRng;

/// Finite-support increment law with exact rational probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    support: Vec<f64>,
    probs: Vec<BigRational>,
    // Cumulative probabilities in f64, only used for sampling.
    cumulative: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(support: Vec<f64>, probs: Vec<BigRational>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::InvalidModel(format!(
                "discrete law needs matching nonempty support ({}) and probs ({})",
                support.len(),
                probs.len()
            )));
        }
        if let Some(v) = support.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "support value {v} is not finite"
            )));
        }
        for (i, a) in support.iter().enumerate() {
            if support[..i].iter().any(|b| b == a) {
                return Err(Error::InvalidModel(format!("support value {a} repeated")));
            }
        }
        if let Some(p) = probs.iter().find(|p| !p.is_positive()) {
            return Err(Error::InvalidModel(format!(
                "probability {p} is not positive"
            )));
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = BigRational::zero();
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc.to_f64().unwrap_or(1.0)
            })
            .collect();
        Ok(Self {
            support,
            probs,
            cumulative,
        })
    }

    /// Two-point law `{+scale, -scale}` with probability 1/2 each.
    pub fn rademacher(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "rademacher scale must be positive, got {scale}"
            )));
        }
        let half = BigRational::new(1.into(), 2.into());
        Self::new(vec![scale, -scale], vec![half.clone(), half])
    }

    /// Point mass at `value`.
    pub fn degenerate(value: f64) -> Result<Self> {
        Self::new(vec![value], vec![BigRational::one()])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn position(&self, value: f64) -> Option<usize> {
        self.support.iter().position(|&s| s == value)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let last = self.support.len() - 1;
        let idx = self.cumulative[..last]
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last);
        self.support[idx]
    }
}

impl fmt::Display for DiscreteLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "discrete[")?;
        for (i, (v, p)) in self.support.iter().zip(&self.probs).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}:{p}")?;
        }
        write!(f, "]")
    }
}

/// Law of one step increment `X_i(t+1) - X_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum IncrementModel {
    Discrete(DiscreteLaw),
    Gaussian { mean: f64, stddev: f64 },
    Uniform { lo: f64, hi: f64 },
    Rademacher { scale: f64 },
}

impl IncrementModel {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        let m = Self::Gaussian { mean, stddev };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = Self::Uniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn rademacher(scale: f64) -> Result<Self> {
        let m = Self::Rademacher { scale };
        m.validate()?;
        Ok(m)
    }

    pub fn discrete(support: Vec<f64>, probs: Vec<BigRational>) -> Result<Self> {
        Ok(Self::Discrete(DiscreteLaw::new(support, probs)?))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Discrete(_) => Ok(()),
            Self::Gaussian { mean, stddev } => {
                if mean.is_finite() && stddev.is_finite() && stddev >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidModel(format!(
                        "gaussian needs finite mean and stddev >= 0, got ({mean}, {stddev})"
                    )))
                }
            }
            Self::Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::InvalidModel(format!(
                        "uniform needs finite lo < hi, got ({lo}, {hi})"
                    )))
                }
            }
            Self::Rademacher { scale } => DiscreteLaw::rademacher(scale).map(|_| ()),
        }
    }

    /// The finite-support form of this law, if it has one.
    pub fn as_discrete(&self) -> Option<DiscreteLaw> {
        match self {
            Self::Discrete(law) => Some(law.clone()),
            Self::Rademacher { scale } => DiscreteLaw::rademacher(*scale).ok(),
            _ => None,
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Discrete(law) => law.draw(rng),
            Self::Gaussian { mean, stddev } => {
                if *stddev == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *stddev)
                        .expect("validated gaussian")
                        .sample(rng)
                }
            }
            Self::Uniform { lo, hi } => Uniform::new(*lo, *hi)
                .expect("validated uniform")
                .sample(rng),
            Self::Rademacher { scale } => {
                if rng.random::<bool>() {
                    *scale
                } else {
                    -*scale
                }
            }
        }
    }
}

impl fmt::Display for IncrementModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Discrete(law) => write!(f, "{law}"),
            Self::Gaussian { mean, stddev } => write!(f, "gaussian({mean}, {stddev})"),
            Self::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            Self::Rademacher { scale } => write!(f, "rademacher({scale})"),
        }
    }
}

/// Persistent-drift model: every process draws one drift `d_i` at time 0 and
/// each step increment is `d_i` plus a draw from `base`.
///
/// Increments of a single process are therefore dependent through `d_i`.
/// Oracles refuse this model.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    pub base: IncrementModel,
    pub drift: DiscreteLaw,
}

impl DriftModel {
    pub fn new(base: IncrementModel, drift: DiscreteLaw) -> Result<Self> {
        base.validate()?;
        Ok(Self { base, drift })
    }

    /// Always true: the flag consumers check before trusting independence.
    pub fn violates_independence(&self) -> bool {
        true
    }

    /// Drift `{+1, -1}` equiprobable over a jump-noise base
    /// `{-6: 1/10, 0: 8/10, +6: 1/10}`.
    ///
    /// With Gaussian base noise the running sum is sufficient for the drift,
    /// so no history-based rule can beat greedy; rare large jumps make the
    /// running sum a poor drift estimate while the median increment stays
    /// sharp.
    pub fn default_experiment() -> Self {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let base =
            IncrementModel::discrete(vec![-6.0, 0.0, 6.0], vec![r(1, 10), r(8, 10), r(1, 10)])
                .expect("static law");
        let drift = DiscreteLaw::new(vec![1.0, -1.0], vec![r(1, 2), r(1, 2)]).expect("static law");
        Self { base, drift }
    }
}

impl fmt::Display for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "drift({} + {})", self.drift, self.base)
    }
}

/// Per-stage increment laws: steps in `(t_{j-1}, t_j]` use `models[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLaws {
    ends: Vec<usize>,
    models: Vec<IncrementModel>,
}

impl StageLaws {
    pub fn new(schedule: &Schedule, models: Vec<IncrementModel>) -> Result<Self> {
        if models.len() != schedule.stages() {
            return Err(Error::InvalidModel(format!(
                "{} stage models given for {} stages",
                models.len(),
                schedule.stages()
            )));
        }
        for m in &models {
            m.validate()?;
        }
        Ok(Self {
            ends: schedule.times().to_vec(),
            models,
        })
    }

    pub fn models(&self) -> &[IncrementModel] {
        &self.models
    }

    fn model_at(&self, step: usize) -> &IncrementModel {
        let j = self
            .ends
            .iter()
            .position(|&end| step <= end)
            .unwrap_or(self.ends.len() - 1);
        &self.models[j]
    }
}

/// Everything that can generate an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessModel {
    Stationary(IncrementModel),
    PerStage(StageLaws),
    Drift(DriftModel),
}

impl ProcessModel {
    pub fn is_independent(&self) -> bool {
        !matches!(self, Self::Drift(d) if d.violates_independence())
    }

    /// Increment law at step `t` (1-based). For drift models this is the base
    /// law, without the per-process drift.
    pub fn step_model(&self, step: usize) -> &IncrementModel {
        match self {
            Self::Stationary(m) => m,
            Self::PerStage(laws) => laws.model_at(step),
            Self::Drift(d) => &d.base,
        }
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl From<IncrementModel> for ProcessModel {
    fn from(m: IncrementModel) -> Self {
        Self::Stationary(m)
    }
}

impl From<DriftModel> for ProcessModel {
    fn from(m: DriftModel) -> Self {
        Self::Drift(m)
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Stationary(m) => write!(f, "{m}"),
            Self::PerStage(laws) => {
                write!(f, "stages[")?;
                for (i, m) in laws.models.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, "]")
            }
            Self::Drift(d) => write!(f, "{d}"),
        }
    }
}

/// Observation times `0 < t_1 < ... < t_k = T` with survivor sizes
/// `N > n_1 > ... > n_k = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    times: Vec<usize>,
    sizes: Vec<usize>,
    n: usize,
    horizon: usize,
}

/// Checks the ordering constraints and builds a [`Schedule`].
pub fn validate_schedule(
    times: &[usize],
    sizes: &[usize],
    n: usize,
    horizon: usize,
) -> Result<Schedule> {
    if times.is_empty() || times.len() != sizes.len() {
        return Err(Error::ScheduleShape {
            times: times.len(),
            sizes: sizes.len(),
        });
    }
    let mut prev = 0;
    for (position, &t) in times.iter().enumerate() {
        if t <= prev {
            return Err(Error::NonMonotoneTimes { position });
        }
        prev = t;
    }
    let last_time = *times.last().expect("nonempty");
    if last_time != horizon {
        return Err(Error::LastTimeNotT {
            got: last_time,
            horizon,
        });
    }
    for position in 1..sizes.len() {
        if sizes[position] >= sizes[position - 1] {
            return Err(Error::NonDecreasingSizes { position });
        }
    }
    let last_size = *sizes.last().expect("nonempty");
    if last_size != 1 {
        return Err(Error::LastSizeNotOne { got: last_size });
    }
    if sizes[0] >= n {
        return Err(Error::SizesExceedN { first: sizes[0], n });
    }
    Ok(Schedule {
        times: times.to_vec(),
        sizes: sizes.to_vec(),
        n,
        horizon,
    })
}

impl Schedule {
    pub fn new(times: &[usize], sizes: &[usize], n: usize, horizon: usize) -> Result<Self> {
        validate_schedule(times, sizes, n, horizon)
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of processes `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of stages `k`.
    pub fn stages(&self) -> usize {
        self.times.len()
    }

    /// `t_j` for 1-based stage `j`; `t_0 = 0`.
    pub fn time(&self, stage: usize) -> usize {
        if stage == 0 {
            0
        } else {
            self.times[stage - 1]
        }
    }

    /// `n_j` for 1-based stage `j`; `n_0 = N`.
    pub fn size(&self, stage: usize) -> usize {
        if stage == 0 {
            self.n
        } else {
            self.sizes[stage - 1]
        }
    }

    /// Steps `t_{j-1}+1 ..= t_j` of block `j` (1-based).
    pub fn block(&self, stage: usize) -> std::ops::RangeInclusive<usize> {
        self.time(stage - 1) + 1..=self.time(stage)
    }

    pub fn block_len(&self, stage: usize) -> usize {
        self.time(stage) - self.time(stage - 1)
    }

    /// Stage `j` whose block contains step `t >= 1`.
    pub fn stage_of_step(&self, step: usize) -> usize {
        self.times
            .iter()
            .position(|&end| step <= end)
            .map_or(self.stages(), |j| j + 1)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} T={} times={:?} sizes={:?}",
            self.n, self.horizon, self.times, self.sizes
        )
    }
}

/// One realization: `N` paths with values at steps `0..=T`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    n: usize,
    horizon: usize,
    values: Vec<f64>,
    pub seed: Option<u64>,
    pub model_tag: String,
}

impl PartialEq for PathEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.horizon == other.horizon && self.values == other.values
    }
}

impl PathEnsemble {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDimensions(
                "ensemble needs at least one path".into(),
            ));
        }
        let width = rows[0].len();
        if width < 2 {
            return Err(Error::InvalidDimensions(
                "paths need at least two time points".into(),
            ));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::InvalidDimensions(format!(
                "path {i} has {} points, expected {width}",
                rows[i].len()
            )));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_flat(n, width - 1, values)
    }

    pub(crate) fn from_flat(n: usize, horizon: usize, values: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(values.len(), n * (horizon + 1));
        for i in 0..n {
            let v = values[i * (horizon + 1)];
            if v != 0.0 {
                return Err(Error::NonZeroStart {
                    process: i,
                    value: v,
                });
            }
        }
        Ok(Self {
            n,
            horizon,
            values,
            seed: None,
            model_tag: String::new(),
        })
    }

    pub fn zeros(n: usize, horizon: usize) -> Self {
        Self {
            n,
            horizon,
            values: vec![0.0; n * (horizon + 1)],
            seed: None,
            model_tag: String::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.horizon + 1;
        &self.values[i * w..(i + 1) * w]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.horizon + 1;
        &mut self.values[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i * (self.horizon + 1) + t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.horizon + 1)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute value difference against another ensemble of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.horizon), (other.n, other.horizon));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bitwise key, usable for hashing and exact set membership.
    pub fn bit_key(&self) -> Vec<u64> {
        self.values.iter().map(|v| (v + 0.0).to_bits()).collect()
    }

    pub fn matches(&self, schedule: &Schedule) -> Result<()> {
        if self.n != schedule.n() || self.horizon != schedule.horizon() {
            return Err(Error::DimensionMismatch(format!(
                "ensemble is {}x{} but schedule has N={} T={}",
                self.n,
                self.horizon,
                schedule.n(),
                schedule.horizon()
            )));
        }
        Ok(())
    }
}

/// Draws one realization.
///
/// Deterministic in `(model, n, horizon, seed)`. Each `(process, step)` cell
/// reads its own position in a ChaCha8 stream (see [`crate::seeding`]), so the
/// result does not depend on the order cells are generated in.
pub fn sample_ensemble(
    model: &ProcessModel,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if n < 2 || horizon < 1 {
        return Err(Error::InvalidDimensions(format!(
            "need N >= 2 and T >= 1, got N={n} T={horizon}"
        )));
    }
    let w = horizon + 1;
    let mut values = vec![0.0; n * w];
    for (i, row) in values.chunks_mut(w).enumerate() {
        let mut cells = CellRng::new(seed, i as u64);
        let drift = match model {
            ProcessModel::Drift(d) => d.drift.draw(cells.at(0)),
            _ => 0.0,
        };
        let mut acc = 0.0;
        for (t, cell) in row.iter_mut().enumerate().skip(1) {
            acc += drift + model.step_model(t).draw(cells.at(t as u64));
            *cell = acc;
        }
    }
    let mut ens = PathEnsemble::from_flat(n, horizon, values)?;
    ens.seed = Some(seed);
    ens.model_tag = model.tag();
    Ok(ens)
}

/// Block increments: the image of an ensemble under the path-to-increments map.
///
/// `blocks[j-1]` is an `N x (t_j - t_{j-1})` grid, row-major per process.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockIncrements {
    n: usize,
    widths: Vec<usize>,
    blocks: Vec<Vec<f64>>,
}

impl BlockIncrements {
    pub fn new(n: usize, blocks: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let mut widths = Vec::with_capacity(blocks.len());
        let mut flat = Vec::with_capacity(blocks.len());
        for (j, block) in blocks.iter().enumerate() {
            if block.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "block {} has {} rows, expected {n}",
                    j + 1,
                    block.len()
                )));
            }
            let w = block[0].len();
            if block.iter().any(|r| r.len() != w) {
                return Err(Error::DimensionMismatch(format!(
                    "block {} is ragged",
                    j + 1
                )));
            }
            widths.push(w);
            flat.push(block.iter().flatten().copied().collect());
        }
        Ok(Self {
            n,
            widths,
            blocks: flat,
        })
    }

    pub fn stages(&self) -> usize {
        self.blocks.len()
    }

    /// Row `i` of block `stage` (1-based).
    pub fn row(&self, stage: usize, i: usize) -> &[f64] {
        let w = self.widths[stage - 1];
        &self.blocks[stage - 1][i * w..(i + 1) * w]
    }
}

/// Splits every path into per-block step increments.
pub fn to_increments(x: &PathEnsemble, schedule: &Schedule) -> Result<BlockIncrements> {
    x.matches(schedule)?;
    let mut blocks = Vec::with_capacity(schedule.stages());
    let mut widths = Vec::with_capacity(schedule.stages());
    for j in 1..=schedule.stages() {
        let mut block = Vec::with_capacity(x.n() * schedule.block_len(j));
        for i in 0..x.n() {
            let row = x.row(i);
            block.extend(schedule.block(j).map(|t| row[t] - row[t - 1]));
        }
        widths.push(schedule.block_len(j));
        blocks.push(block);
    }
    Ok(BlockIncrements {
        n: x.n(),
        widths,
        blocks,
    })
}

/// Rebuilds paths from block increments by cumulative summation from 0.
pub fn from_increments(b: &BlockIncrements, schedule: &Schedule) -> Result<PathEnsemble> {
    let expected: Vec<usize> = (1..=schedule.stages())
        .map(|j| schedule.block_len(j))
        .collect();
    if b.n != schedule.n() || b.widths != expected {
        return Err(Error::DimensionMismatch(format!(
            "block widths {:?} for N={} do not match schedule widths {:?} for N={}",
            b.widths,
            b.n,
            expected,
            schedule.n()
        )));
    }
    let mut x = PathEnsemble::zeros(b.n, schedule.horizon());
    for i in 0..b.n {
        let row = x.row_mut(i);
        for j in 1..=schedule.stages() {
            for (t, d) in schedule.block(j).zip(b.row(j, i)) {
                row[t] = row[t - 1] + d;
            }
        }
    }
    Ok(x)
}
