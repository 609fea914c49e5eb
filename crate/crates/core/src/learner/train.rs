//! Training loops for epsilon-ADQL and its constrained variant epsilon-CADQL.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lagrange::{shaped_reward, LagrangeState};
use super::model::QModel;
use super::params::{Hyperparams, PolicyKind};
use crate::admissibility::{admissible_subset, is_violation, score_actions, ScoredAction};
use crate::env::{Action, EnvConfig, Episode, WorldState};
use crate::error::{Error, Result};

/// Everything known about one training transition.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub episode: usize,
    pub step: usize,
    pub state: &'a WorldState,
    pub action: Action,
    /// The action was drawn by exploration rather than by the greedy rule.
    pub explored: bool,
    /// Every legal action from `state`, scored.
    pub available: &'a [ScoredAction],
    /// The epsilon-admissible subset of `available`.
    pub admissible: &'a [ScoredAction],
    pub next_state: &'a WorldState,
    pub raw_reward: f64,
    pub shaped_reward: f64,
    pub violation: bool,
    pub td_error: f64,
    /// Multiplier in force during this episode (0 for the unconstrained learner).
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub raw_reward_sum: f64,
    pub violations: usize,
    pub truncated: bool,
    pub exploration: f64,
    pub avg_reward: f64,
    /// State after the end-of-episode multiplier and estimate updates.
    pub lagrange: Option<LagrangeState>,
}

/// Hooks into a training run; both methods default to no-ops.
pub trait TrainObserver {
    fn on_step(&mut self, _record: &StepRecord<'_>) {}
    fn on_episode(&mut self, _record: &EpisodeRecord) {}
}

impl TrainObserver for () {}

pub fn train_eadql(config: &EnvConfig, hyper: &Hyperparams, seed: u64) -> Result<QModel> {
    train_observed(PolicyKind::Eadql, config, hyper, seed, &mut ())
}

pub fn train_ecadql(config: &EnvConfig, hyper: &Hyperparams, seed: u64) -> Result<QModel> {
    train_observed(PolicyKind::Ecadql, config, hyper, seed, &mut ())
}

pub fn train(
    kind: PolicyKind,
    config: &EnvConfig,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<QModel> {
    train_observed(kind, config, hyper, seed, &mut ())
}

/// Runs `hyper.episodes` episodes of the learner selected by `kind`.
///
/// `Adql` and `Eadql` share the unconstrained loop; `Adql` requires
/// `epsilon >= 1` so that every legal action stays admissible.
pub fn train_observed(
    kind: PolicyKind,
    config: &EnvConfig,
    hyper: &Hyperparams,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<QModel> {
    match kind {
        PolicyKind::Local => {
            return Err(Error::InvalidConfig(
                "local policy needs no training".into(),
            ));
        }
        PolicyKind::Adql if hyper.epsilon < 1.0 => {
            return Err(Error::InvalidConfig(format!(
                "adql trains with epsilon = 1, got {}",
                hyper.epsilon
            )));
        }
        _ => {}
    }
    config.validate()?;
    hyper.validate()?;

    let constrained = kind.is_constrained();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = QModel::new(kind, hyper.clone());
    let mut lagrange = constrained.then(LagrangeState::default);

    for episode in 0..hyper.episodes {
        let exploration = hyper.exploration_rate(episode);
        let lambda = lagrange.map_or(0.0, |l| l.lambda);
        let mut env = Episode::reset(config, &mut rng)?;
        let mut scored = score_actions(env.state(), config)?;
        let mut raw_reward_sum = 0.0;
        let mut violations = 0;

        while !env.is_done() {
            let state = env.state().clone();
            let key = model.key(&state);
            let admissible = admissible_subset(&scored, hyper.epsilon);

            let explored = rng.gen::<f64>() < exploration;
            let action = if explored {
                let pool = if hyper.explore_admissible_only {
                    &admissible
                } else {
                    &scored
                };
                pool[rng.gen_range(0..pool.len())].action
            } else {
                model
                    .choose(&key, &admissible)
                    .expect("admissible set is never empty")
            };

            let outcome = env.step_trusted(&action)?;
            let raw = outcome.reward;
            raw_reward_sum += raw;
            let violation = is_violation(raw, hyper.tau);
            if violation {
                violations += 1;
            }
            let reward = if constrained {
                shaped_reward(raw, violation, lambda)
            } else {
                raw
            };

            let next_scored = score_actions(&outcome.next_state, config)?;
            let next_candidates: Vec<Action> = admissible_subset(&next_scored, hyper.epsilon)
                .iter()
                .map(|s| s.action)
                .collect();
            let next_key = model.key(&outcome.next_state);
            let td_error = model.q.update(
                &key,
                action,
                &next_key,
                &next_candidates,
                reward,
                hyper.alpha,
                hyper.beta,
                &mut rng,
            );

            observer.on_step(&StepRecord {
                episode,
                step: env.steps() - 1,
                state: &state,
                action,
                explored,
                available: &scored,
                admissible: &admissible,
                next_state: &outcome.next_state,
                raw_reward: raw,
                shaped_reward: reward,
                violation,
                td_error,
                lambda,
            });
            scored = next_scored;
        }

        let steps = env.steps();
        if let Some(l) = lagrange.as_mut() {
            *l = l.lagrange_update(violations, hyper.alpha_lambda);
            l.record_episode(
                raw_reward_sum,
                violations,
                steps,
                hyper.beta_r,
                hyper.beta_v,
            );
        }
        model.episodes_trained = episode + 1;
        observer.on_episode(&EpisodeRecord {
            episode,
            steps,
            raw_reward_sum,
            violations,
            truncated: env.is_truncated(),
            exploration,
            avg_reward: model.q.avg_reward,
            lagrange,
        });
    }

    model.lagrange = lagrange;
    Ok(model)
}
