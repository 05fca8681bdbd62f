//! JSON-facing descriptions of models, schedules and runs.
//!
//! ```json
//! {"model": {"kind": "discrete", "support": [1, -1], "probs": ["1/2", "1/2"]},
//!  "schedule": {"times": [1, 2], "sizes": [2, 1], "N": 3, "T": 2}}
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteLaw, DriftModel, IncrementModel, ProcessModel, Schedule, StageLaws};
use crate::selection::StrategySpec;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Discrete {
        support: Vec<f64>,
        /// Exact probabilities as `"p/q"` strings.
        probs: Vec<String>,
    },
    Gaussian {
        #[serde(default)]
        mean: f64,
        stddev: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Rademacher {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Base increments plus a per-process drift drawn once at time 0.
    Drift {
        base: Box<ModelSpec>,
        drift_support: Vec<f64>,
        drift_probs: Vec<String>,
    },
}

pub fn parse_rational(text: &str) -> Result<BigRational> {
    BigRational::from_str(text.trim()).map_err(|_| Error::InvalidRational(text.to_string()))
}

fn parse_law(support: &[f64], probs: &[String]) -> Result<DiscreteLaw> {
    let probs = probs
        .iter()
        .map(|p| parse_rational(p))
        .collect::<Result<_>>()?;
    DiscreteLaw::new(support.to_vec(), probs)
}

impl ModelSpec {
    /// The law of one increment; drift specs are not increment laws.
    pub fn increment(&self) -> Result<IncrementModel> {
        match self {
            Self::Discrete { support, probs } => {
                Ok(IncrementModel::Discrete(parse_law(support, probs)?))
            }
            Self::Gaussian { mean, stddev } => IncrementModel::gaussian(*mean, *stddev),
            Self::Uniform { lo, hi } => IncrementModel::uniform(*lo, *hi),
            Self::Rademacher { scale } => IncrementModel::rademacher(*scale),
            Self::Drift { .. } => Err(Error::InvalidModel(
                "a drift model cannot be used as an increment law".into(),
            )),
        }
    }

    pub fn process(&self) -> Result<ProcessModel> {
        match self {
            Self::Drift {
                base,
                drift_support,
                drift_probs,
            } => Ok(ProcessModel::Drift(DriftModel::new(
                base.increment()?,
                parse_law(drift_support, drift_probs)?,
            )?)),
            other => Ok(ProcessModel::Stationary(other.increment()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub times: Vec<usize>,
    pub sizes: Vec<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Schedule> {
        Schedule::new(&self.times, &self.sizes, self.n, self.horizon)
    }
}

impl From<&Schedule> for ScheduleSpec {
    fn from(s: &Schedule) -> Self {
        Self {
            times: s.times().to_vec(),
            sizes: s.sizes().to_vec(),
            n: s.n(),
            horizon: s.horizon(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSpec {
    /// Largest number of atoms enumerated.
    #[serde(default = "default_enumeration_cap")]
    pub enumeration: u64,
    /// Largest number of policies tried by exhaustive search.
    #[serde(default = "default_search_cap")]
    pub search: u64,
}

fn default_enumeration_cap() -> u64 {
    crate::enumerate::DEFAULT_ENUMERATION_CAP
}

fn default_search_cap() -> u64 {
    1_000_000
}

impl Default for CapSpec {
    fn default() -> Self {
        Self {
            enumeration: default_enumeration_cap(),
            search: default_search_cap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Option<OutputFormat>,
}

/// A complete run description. Command-line flags override these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub schedule: ScheduleSpec,
    /// One increment law per stage block, replacing `model` block by block.
    #[serde(default)]
    pub stage_models: Option<Vec<ModelSpec>>,
    #[serde(default)]
    pub strategy: Option<StrategySpec>,
    #[serde(default)]
    pub strategies: Option<Vec<StrategySpec>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub caps: CapSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A validated model and schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub model: ProcessModel,
    pub schedule: Schedule,
}

impl RunConfig {
    pub fn new(model: ModelSpec, schedule: ScheduleSpec) -> Self {
        Self {
            model,
            schedule,
            stage_models: None,
            strategy: None,
            strategies: None,
            seed: None,
            reps: None,
            caps: CapSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn instance(&self) -> Result<Instance> {
        let schedule = self.schedule.build()?;
        let model = match &self.stage_models {
            None => self.model.process()?,
            Some(specs) => {
                if matches!(self.model, ModelSpec::Drift { .. }) {
                    return Err(Error::InvalidModel(
                        "stage_models cannot be combined with a drift model".into(),
                    ));
                }
                let laws = specs
                    .iter()
                    .map(ModelSpec::increment)
                    .collect::<Result<_>>()?;
                ProcessModel::PerStage(StageLaws::new(&schedule, laws)?)
            }
        };
        Ok(Instance { model, schedule })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INSTANCE_A: &str = r#"{
        "model": {"kind": "discrete", "support": [1, -1], "probs": ["1/2", "1/2"]},
        "schedule": {"times": [1, 2], "sizes": [2, 1], "N": 3, "T": 2},
        "strategy": {"name": "random_fixed", "aux_seed": 42}
    }"#;

    #[test]
    fn parses_instance_a() {
        let cfg: RunConfig = serde_json::from_str(INSTANCE_A).unwrap();
        let inst = cfg.instance().unwrap();
        assert_eq!(inst.schedule.times(), &[1, 2]);
        let law = inst.model.step_model(1).as_discrete().unwrap();
        assert_eq!(law.support(), &[1.0, -1.0]);
        assert_eq!(
            cfg.strategy,
            Some(StrategySpec::RandomFixed { aux_seed: Some(42) })
        );
        assert_eq!(cfg.caps, CapSpec::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = INSTANCE_A.replace("\"N\": 3", "\"N\": 3, \"extra\": 1");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
        let bad = INSTANCE_A.replace("\"kind\": \"discrete\"", "\"kind\": \"discrete\", \"x\": 0");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
        let bad = INSTANCE_A.replace("\"sizes\": [2, 1], ", "");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
    }

    #[test]
    fn model_errors_surface() {
        let bad = INSTANCE_A.replace("\"1/2\", \"1/2\"", "\"1/2\", \"0.5\"");
        let cfg: RunConfig = serde_json::from_str(&bad).unwrap();
        assert_eq!(cfg.instance(), Err(Error::InvalidRational("0.5".into())));
        let bad = INSTANCE_A.replace("\"T\": 2", "\"T\": 3");
        let cfg: RunConfig = serde_json::from_str(&bad).unwrap();
        assert!(matches!(cfg.instance(), Err(Error::LastTimeNotT { .. })));
    }

    #[test]
    fn drift_and_stage_models() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"model": {"kind": "drift", "base": {"kind": "gaussian", "stddev": 2},
                          "drift_support": [1, -1], "drift_probs": ["1/2", "1/2"]},
                "schedule": {"times": [1, 10], "sizes": [2, 1], "N": 8, "T": 10}}"#,
        )
        .unwrap();
        assert!(!cfg.instance().unwrap().model.is_independent());

        let mut cfg: RunConfig = serde_json::from_str(INSTANCE_A).unwrap();
        cfg.stage_models = Some(vec![
            ModelSpec::Rademacher { scale: 1.0 },
            ModelSpec::Rademacher { scale: 2.0 },
        ]);
        let inst = cfg.instance().unwrap();
        assert_eq!(
            inst.model.step_model(2),
            &IncrementModel::rademacher(2.0).unwrap()
        );
    }

    #[test]
    fn round_trips_through_json() {
        let cfg: RunConfig = serde_json::from_str(INSTANCE_A).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
