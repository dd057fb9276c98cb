use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algorithms::DEFAULT_POLICY_CAP;
use crate::design::DEFAULT_TOL;
use crate::environments::{AdversaryKind, AdversarySpec, Availability, ContextSpec, FeedbackModel};
use crate::error::{BanditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    LogdetFtrl,
    Exp4,
    MisspecFtrl,
    Corral,
    UniformRandom,
}

impl AlgorithmKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmKind::LogdetFtrl => "logdet_ftrl",
            AlgorithmKind::Exp4 => "exp4",
            AlgorithmKind::MisspecFtrl => "misspec_ftrl",
            AlgorithmKind::Corral => "corral",
            AlgorithmKind::UniformRandom => "uniform_random",
        }
    }
}

fn default_grid_step() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn one() -> f64 {
    1.0
}
fn default_reservoir() -> usize {
    64
}
fn default_policy_cap() -> u64 {
    DEFAULT_POLICY_CAP as u64
}

/// Knobs that override algorithm defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    /// Spacing of the EXP4 linear policy grid.
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Maximum EXP4 policy count.
    #[serde(default = "default_policy_cap")]
    pub policy_cap: u64,
    /// Relative Frank-Wolfe gap tolerance of the per-context FTRL solve.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Frank-Wolfe iteration cap; unset scales with the action set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Known misspecification level for `misspec_ftrl`.
    #[serde(default)]
    pub epsilon: f64,
    /// Context store size for continuous context distributions.
    #[serde(default = "default_reservoir")]
    pub reservoir: usize,
    /// Multipliers on the Logdet-FTRL regularization, bonus and learning-rate
    /// schedules. Values other than 1 leave the analyzed regime.
    #[serde(default = "one")]
    pub beta_scale: f64,
    #[serde(default = "one")]
    pub alpha_scale: f64,
    #[serde(default = "one")]
    pub eta_scale: f64,
    /// Corral scale constant; unset uses the dimension-based default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_prime: Option<f64>,
}

impl Default for ScheduleOverrides {
    fn default() -> Self {
        Self {
            grid_step: default_grid_step(),
            policy_cap: default_policy_cap(),
            tol: default_tol(),
            max_iter: None,
            epsilon: 0.0,
            reservoir: default_reservoir(),
            beta_scale: 1.0,
            alpha_scale: 1.0,
            eta_scale: 1.0,
            c1_prime: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmKind,
    pub d: usize,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub context: ContextSpec,
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub feedback: FeedbackModel,
    #[serde(default)]
    pub schedule: ScheduleOverrides,
    /// Directory for trace CSVs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    /// Sleeping bandits with a fixed loss vector.
    pub fn example(algorithm: AlgorithmKind, d: usize, horizon: u64) -> Self {
        let mut y = vec![0.0; d];
        y[0] = 1.0;
        Self {
            algorithm,
            d,
            horizon,
            seeds: vec![0],
            context: ContextSpec::Sleeping {
                q: Availability::Shared(0.5),
            },
            adversary: AdversarySpec::linear(AdversaryKind::Fixed { y }),
            feedback: FeedbackModel::TwoPoint,
            schedule: ScheduleOverrides::default(),
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(BanditError::Config("d must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(BanditError::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(BanditError::Config("seeds must be nonempty".into()));
        }
        self.context.sampler(self.d)?;
        self.adversary.validate(self.d)?;
        let s = &self.schedule;
        if !(s.grid_step > 0.0 && s.grid_step.is_finite()) {
            return Err(BanditError::Config("schedule.grid_step must be positive".into()));
        }
        if !(s.tol > 0.0) {
            return Err(BanditError::Config("schedule.tol must be positive".into()));
        }
        if s.max_iter == Some(0) {
            return Err(BanditError::Config("schedule.max_iter must be positive".into()));
        }
        if !(s.epsilon >= 0.0 && s.epsilon.is_finite()) {
            return Err(BanditError::Config("schedule.epsilon must be >= 0".into()));
        }
        if s.reservoir == 0 {
            return Err(BanditError::Config("schedule.reservoir must be positive".into()));
        }
        for (name, v) in [("beta_scale", s.beta_scale), ("alpha_scale", s.alpha_scale), ("eta_scale", s.eta_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BanditError::Config(format!("schedule.{name} must be positive")));
            }
        }
        if let Some(c) = s.c1_prime {
            if !(c > 0.0 && c.is_finite()) {
                return Err(BanditError::Config("schedule.c1_prime must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BanditError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BanditError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BanditError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        BanditError::Config(m) => BanditError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
