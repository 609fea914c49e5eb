//! Lagrange multiplier bookkeeping for the constrained learner.

use serde::{Deserialize, Serialize};

/// Penalty weight `lambda` with the running per-episode estimates it is
/// projected against: `r_hat` (average raw reward per step) and `v_hat`
/// (violation ratio).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    pub r_hat: f64,
    pub v_hat: f64,
}

impl LagrangeState {
    /// `r_hat / v_hat`, or `None` before any violation has been recorded.
    pub fn bound(&self) -> Option<f64> {
        (self.v_hat > 0.0).then(|| self.r_hat / self.v_hat)
    }

    /// `lambda' = min(lambda + alpha_lambda * violations, r_hat / v_hat)`.
    /// The estimates are left untouched.
    pub fn lagrange_update(&self, violations: usize, alpha_lambda: f64) -> Self {
        let raised = self.lambda + alpha_lambda * violations as f64;
        let lambda = match self.bound() {
            Some(b) => raised.min(b),
            None => raised,
        };
        Self { lambda, ..*self }
    }

    /// Fold one finished episode of `steps` steps into the estimates.
    pub fn record_episode(
        &mut self,
        raw_reward_sum: f64,
        violations: usize,
        steps: usize,
        beta_r: f64,
        beta_v: f64,
    ) {
        if steps == 0 {
            return;
        }
        let n = steps as f64;
        self.v_hat = beta_v * (violations as f64 / n) + (1.0 - beta_v) * self.v_hat;
        self.r_hat = beta_r * (raw_reward_sum / n) + (1.0 - beta_r) * self.r_hat;
    }
}

/// Penalised reward: `reward - lambda` on a violating transition.
pub fn shaped_reward(reward: f64, violated: bool, lambda: f64) -> f64 {
    if violated {
        reward - lambda
    } else {
        reward
    }
}
