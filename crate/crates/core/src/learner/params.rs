use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::levels::LevelParams;
use crate::error::{Error, Result};

/// Which policy an experiment trains or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Greedy next-state alignment; needs no training.
    Local,
    /// Epsilon-ADQL trained with epsilon = 1, i.e. without admissibility
    /// restrictions during training.
    Adql,
    Eadql,
    Ecadql,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Local => "local",
            PolicyKind::Adql => "adql",
            PolicyKind::Eadql => "eadql",
            PolicyKind::Ecadql => "ecadql",
        }
    }

    pub fn is_constrained(self) -> bool {
        self == PolicyKind::Ecadql
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "local" => Ok(PolicyKind::Local),
            "adql" => Ok(PolicyKind::Adql),
            "eadql" => Ok(PolicyKind::Eadql),
            "ecadql" => Ok(PolicyKind::Ecadql),
            other => Err(format!("unknown policy kind {other:?}")),
        }
    }
}

/// Learning-rate and behaviour parameters for both training algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Q-table step size.
    pub alpha: f64,
    /// Average-reward estimator step size.
    pub beta: f64,
    /// Lagrange multiplier step size.
    pub alpha_lambda: f64,
    /// Smoothing of the per-episode violation ratio estimate.
    pub beta_v: f64,
    /// Smoothing of the per-episode average reward estimate.
    pub beta_r: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub episodes: usize,
    /// Exploration probability at the first episode; decays linearly to 0.
    pub p0: f64,
    pub level_params: LevelParams,
    /// Draw exploratory actions from the epsilon-admissible set instead of
    /// every legal action.
    #[serde(default)]
    pub explore_admissible_only: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            beta: 0.01,
            alpha_lambda: 0.0003,
            beta_v: 0.001,
            beta_r: 0.001,
            epsilon: 0.1,
            tau: 0.7,
            episodes: 30_000,
            p0: 0.3,
            level_params: LevelParams::default(),
            explore_admissible_only: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("alpha_lambda", self.alpha_lambda),
            ("beta_v", self.beta_v),
            ("beta_r", self.beta_r),
        ];
        for (name, r) in rates {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {r}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::InvalidConfig(format!(
                "p0 must lie in [0, 1], got {}",
                self.p0
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        // tau = 0 is accepted: it switches the constraint off.
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in [0, 1), got {}",
                self.tau
            )));
        }
        self.level_params.validate()
    }

    /// Exploration probability for 0-based episode `episode`.
    pub fn exploration_rate(&self, episode: usize) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        self.p0 * (1.0 - episode as f64 / self.episodes as f64)
    }
}
