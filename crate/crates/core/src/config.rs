//! Single-file experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Node, ResetMode, WorldState};
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::learner::{Hyperparams, PolicyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Litres to distribute before an evaluation episode ends.
    pub total_to_distribute: u64,
    /// Start of the fixed evaluation scenario.
    pub initial_state: WorldState,
    /// Random initial states for the aggregate evaluation; 0 skips it.
    pub n_runs: usize,
    pub epsilon_eval: f64,
    pub out_dir: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            total_to_distribute: 3_000_000,
            initial_state: WorldState {
                levels: vec![0.0, 300.0, 200.0, 200.0],
                position: Node::Source,
                load: 60_000,
                distributed_total: 0,
            },
            n_runs: 1000,
            epsilon_eval: 0.1,
            out_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub hyper: Hyperparams,
    pub policy_kind: PolicyKind,
    pub eval: EvalConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default_map(),
            hyper: Hyperparams::default(),
            policy_kind: PolicyKind::Eadql,
            eval: EvalConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.hyper.validate()?;
        if self.policy_kind == PolicyKind::Adql && self.hyper.epsilon < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "policy_kind adql requires hyper.epsilon = 1, got {}",
                self.hyper.epsilon
            )));
        }
        if self.eval.epsilon_eval.is_nan() || self.eval.epsilon_eval < 0.0 {
            return Err(Error::InvalidConfig(
                "eval.epsilon_eval must be >= 0".into(),
            ));
        }
        if self.eval.total_to_distribute == 0 {
            return Err(Error::InvalidConfig(
                "eval.total_to_distribute must be positive".into(),
            ));
        }
        self.eval.initial_state.validate(&self.env)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Environment for the fixed evaluation scenario.
    pub fn eval_env_fixed(&self) -> EnvConfig {
        self.env
            .with_total(self.eval.total_to_distribute)
            .with_reset(ResetMode::Fixed {
                state: self.eval.initial_state.clone(),
            })
    }

    /// Environment for aggregate evaluation: the training reset distribution
    /// with the evaluation stopping amount.
    pub fn eval_env_random(&self) -> EnvConfig {
        self.env.with_total(self.eval.total_to_distribute)
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            n_runs: self.eval.n_runs,
            seed: self.seed,
            epsilon_eval: self.eval.epsilon_eval,
            tau: self.hyper.tau,
            reference_start: Some(self.eval.initial_state.clone()),
        }
    }
}
