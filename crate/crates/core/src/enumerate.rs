//! Exact enumeration of the path space of a finite-support model.
//!
//! Atoms are indexed by a mixed-radix integer whose digit `(t-1)*N + i`
//! selects the support point of increment `X_i(t) - X_i(t-1)`. Atom weights
//! are kept as integer numerators over a common denominator so that sums of
//! many atoms stay exact without per-atom gcd work.

use std::ops::Range;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::model::{DiscreteLaw, IncrementModel, PathEnsemble, ProcessModel};

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Values used in exact computations must be integer multiples of
/// `2^-EXACT_BITS`, so sums of up to 2^12 increments stay exact in f64.
pub const EXACT_BITS: i32 = 20;
const EXACT_MAX_MAGNITUDE: f64 = (1u64 << 20) as f64;
const EXACT_MAX_HORIZON: usize = 1 << 12;

/// `value * 2^EXACT_BITS` as an integer, if that is exact.
pub fn exact_units(value: f64) -> Option<i64> {
    let scaled = value * (1u64 << EXACT_BITS) as f64;
    (scaled.is_finite() && scaled.fract() == 0.0 && scaled.abs() < 9.0e15).then_some(scaled as i64)
}

/// Converts an integer count of `2^-EXACT_BITS` units back to an exact rational.
pub fn units_to_rational(units: BigInt) -> BigRational {
    BigRational::new(units, BigInt::from(1u64 << EXACT_BITS))
}

struct StepLaw {
    law: DiscreteLaw,
    numerators: Vec<BigUint>,
    denominator: BigUint,
}

/// The finite path space of a discrete independent-increment model.
pub struct PathSpace {
    n: usize,
    horizon: usize,
    steps: Vec<StepLaw>,
    count: u64,
    denominator: BigUint,
    model_tag: String,
}

/// One enumerated realization with its probability numerator.
#[derive(Debug, Clone)]
pub struct Atom {
    pub ensemble: PathEnsemble,
    pub weight: BigUint,
}

impl PathSpace {
    pub fn new(model: &ProcessModel, n: usize, horizon: usize, cap: u64) -> Result<Self> {
        if !model.is_independent() {
            return Err(Error::IndependenceViolated(format!(
                "{model} carries a persistent per-process drift"
            )));
        }
        if n == 0 || horizon == 0 {
            return Err(Error::InvalidDimensions(format!(
                "need N >= 1 and T >= 1, got N={n} T={horizon}"
            )));
        }
        if horizon > EXACT_MAX_HORIZON {
            return Err(Error::InvalidDimensions(format!(
                "exact enumeration supports T <= {EXACT_MAX_HORIZON}, got {horizon}"
            )));
        }
        let mut steps = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let m = model.step_model(t);
            let law = m
                .as_discrete()
                .ok_or_else(|| Error::NotDiscrete(m.to_string()))?;
            for &v in law.support() {
                if exact_units(v).is_none() || v.abs() > EXACT_MAX_MAGNITUDE {
                    return Err(Error::InexactSupport(v));
                }
            }
            let denominator = law
                .probs()
                .iter()
                .fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
            let numerators = law
                .probs()
                .iter()
                .map(|p| {
                    (p.numer() * (&denominator / p.denom()))
                        .to_biguint()
                        .expect("positive probability")
                })
                .collect();
            steps.push(StepLaw {
                law,
                numerators,
                denominator: denominator.to_biguint().expect("positive"),
            });
        }
        let mut size = BigUint::one();
        let mut denominator = BigUint::one();
        for step in &steps {
            size *= BigUint::from(step.law.len()).pow(n as u32);
            denominator *= step.denominator.pow(n as u32);
        }
        let count =
            size.to_u64()
                .filter(|&c| c <= cap)
                .ok_or_else(|| Error::EnumerationTooLarge {
                    size: size.to_string(),
                    cap,
                })?;
        Ok(Self {
            n,
            horizon,
            steps,
            count,
            denominator,
            model_tag: model.tag(),
        })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Common denominator of all atom weights.
    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    /// Support law at step `t` (1-based).
    pub fn law(&self, step: usize) -> &DiscreteLaw {
        &self.steps[step - 1].law
    }

    /// Numerator of the probability of support point `k` at step `t`,
    /// over that step's own denominator.
    pub fn step_numerator(&self, step: usize, k: usize) -> &BigUint {
        &self.steps[step - 1].numerators[k]
    }

    pub fn step_denominator(&self, step: usize) -> &BigUint {
        &self.steps[step - 1].denominator
    }

    pub fn atom(&self, index: u64) -> Atom {
        assert!(index < self.count, "atom index out of range");
        let w = self.horizon + 1;
        let mut values = vec![0.0; self.n * w];
        let mut weight = BigUint::one();
        let mut rest = index;
        for t in 1..=self.horizon {
            let step = &self.steps[t - 1];
            let radix = step.law.len() as u64;
            for i in 0..self.n {
                let k = (rest % radix) as usize;
                rest /= radix;
                values[i * w + t] = values[i * w + t - 1] + step.law.support()[k];
                if radix > 1 {
                    weight *= &step.numerators[k];
                }
            }
        }
        let mut ensemble =
            PathEnsemble::from_flat(self.n, self.horizon, values).expect("paths start at 0");
        ensemble.model_tag = self.model_tag.clone();
        Atom { ensemble, weight }
    }

    pub fn atoms(&self, range: Range<u64>) -> impl Iterator<Item = Atom> + '_ {
        range.map(move |i| self.atom(i))
    }

    /// Probability numerator of an arbitrary ensemble over
    /// [`Self::denominator`]; `None` if some increment lies outside the support.
    pub fn weight(&self, x: &PathEnsemble) -> Option<BigUint> {
        if x.n() != self.n || x.horizon() != self.horizon {
            return None;
        }
        let mut numer = BigUint::one();
        for i in 0..self.n {
            let row = x.row(i);
            for t in 1..=self.horizon {
                let k = self.steps[t - 1].law.position(row[t] - row[t - 1])?;
                numer *= &self.steps[t - 1].numerators[k];
            }
        }
        Some(numer)
    }

    /// Exact probability of an arbitrary ensemble.
    pub fn probability(&self, x: &PathEnsemble) -> Option<BigRational> {
        self.weight(x).map(|w| self.weight_to_probability(&w))
    }

    pub fn weight_to_probability(&self, weight: &BigUint) -> BigRational {
        BigRational::new(weight.clone().into(), self.denominator.clone().into())
    }

    /// Contiguous index ranges covering all atoms, in order.
    pub fn chunks(&self, chunk: u64) -> Vec<Range<u64>> {
        let chunk = chunk.max(1);
        (0..self.count.div_ceil(chunk))
            .map(|c| c * chunk..((c + 1) * chunk).min(self.count))
            .collect()
    }
}

/// Lists every realization of a discrete model with its exact probability.
pub fn enumerate_paths(
    model: &IncrementModel,
    n: usize,
    horizon: usize,
    cap: u64,
) -> Result<Vec<(PathEnsemble, BigRational)>> {
    let space = PathSpace::new(&ProcessModel::Stationary(model.clone()), n, horizon, cap)?;
    Ok(space
        .atoms(0..space.len())
        .map(|a| {
            let p = space.weight_to_probability(&a.weight);
            (a.ensemble, p)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriftModel, Schedule, StageLaws};
    use num_traits::Zero;
    use std::collections::HashSet;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rademacher_three_by_two_has_64_equal_atoms() {
        let m = IncrementModel::rademacher(1.0).unwrap();
        let atoms = enumerate_paths(&m, 3, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(atoms.len(), 64);
        assert!(atoms.iter().all(|(_, p)| *p == r(1, 64)));
        let distinct: HashSet<_> = atoms.iter().map(|(x, _)| x.bit_key()).collect();
        assert_eq!(distinct.len(), 64);
        assert!(atoms.iter().all(|(x, _)| x.rows().all(|row| row[0] == 0.0)));
    }

    #[test]
    fn degenerate_support_has_one_atom() {
        let m = IncrementModel::discrete(vec![0.0], vec![BigRational::one()]).unwrap();
        let atoms = enumerate_paths(&m, 2, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].1, BigRational::one());
    }

    #[test]
    fn probabilities_sum_to_one_for_skewed_law() {
        let m = IncrementModel::discrete(vec![-1.0, 0.5, 2.0], vec![r(1, 6), r(1, 2), r(1, 3)])
            .unwrap();
        let atoms = enumerate_paths(&m, 2, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(atoms.len(), 729);
        let total: BigRational = atoms.iter().map(|(_, p)| p.clone()).sum();
        assert_eq!(total, BigRational::one());
        let space =
            PathSpace::new(&ProcessModel::Stationary(m), 2, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        for (x, p) in &atoms {
            assert_eq!(space.probability(x).as_ref(), Some(p));
        }
    }

    #[test]
    fn per_stage_enumeration_mixes_supports() {
        let s = Schedule::new(&[1, 2], &[2, 1], 3, 2).unwrap();
        let laws = StageLaws::new(
            &s,
            vec![
                IncrementModel::rademacher(1.0).unwrap(),
                IncrementModel::discrete(vec![0.0, 3.0, -3.0], vec![r(1, 3), r(1, 3), r(1, 3)])
                    .unwrap(),
            ],
        )
        .unwrap();
        let space = PathSpace::new(&ProcessModel::PerStage(laws), 3, 2, 1000).unwrap();
        assert_eq!(space.len(), 8 * 27);
        let total = space
            .atoms(0..space.len())
            .fold(BigUint::zero(), |acc, a| acc + a.weight);
        assert_eq!(&total, space.denominator());
    }

    #[test]
    fn cap_and_hypothesis_guards() {
        let m = IncrementModel::rademacher(1.0).unwrap();
        assert!(matches!(
            enumerate_paths(&m, 3, 2, 63),
            Err(Error::EnumerationTooLarge { cap: 63, .. })
        ));
        let drift = DriftModel::default_experiment();
        assert!(matches!(
            PathSpace::new(&ProcessModel::Drift(drift), 2, 2, 100),
            Err(Error::IndependenceViolated(_))
        ));
        let g = IncrementModel::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(
            enumerate_paths(&g, 2, 2, 100),
            Err(Error::NotDiscrete(_))
        ));
        let tenth = IncrementModel::discrete(vec![0.1, -0.1], vec![r(1, 2), r(1, 2)]).unwrap();
        assert!(matches!(
            enumerate_paths(&tenth, 2, 2, 100),
            Err(Error::InexactSupport(_))
        ));
    }

    #[test]
    fn exact_units_round_trip() {
        assert_eq!(exact_units(1.5), Some(3 << 19));
        assert_eq!(exact_units(-2.0), Some(-(2 << 20)));
        assert_eq!(exact_units(0.1), None);
        assert_eq!(units_to_rational(BigInt::from(3 << 19)), r(3, 2));
    }
}
