//! The learned policy and its JSON persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::double_q::{DoubleQ, QTable};
use super::lagrange::LagrangeState;
use super::levels::{LevelParams, LevelisedState};
use super::params::{Hyperparams, PolicyKind};
use crate::admissibility::{admissible_subset, score_actions, ScoredAction};
use crate::env::{Action, EnvConfig, WorldState};
use crate::error::{Error, Result};

/// Two Q-tables over levelised states plus the average-reward estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct QModel {
    pub kind: PolicyKind,
    pub hyper: Hyperparams,
    pub q: DoubleQ<LevelisedState, Action>,
    /// Final multiplier and estimates; only set for the constrained learner.
    pub lagrange: Option<LagrangeState>,
    pub episodes_trained: usize,
}

impl QModel {
    pub fn new(kind: PolicyKind, hyper: Hyperparams) -> Self {
        Self {
            kind,
            hyper,
            q: DoubleQ::new(),
            lagrange: None,
            episodes_trained: 0,
        }
    }

    pub fn level_params(&self) -> &LevelParams {
        &self.hyper.level_params
    }

    pub fn key(&self, state: &WorldState) -> LevelisedState {
        self.hyper.level_params.levelise(state)
    }

    /// Greedy choice on `Q + Q'` among already-filtered admissible actions.
    pub fn choose(&self, key: &LevelisedState, admissible: &[ScoredAction]) -> Option<Action> {
        let mut best: Option<(Action, f64)> = None;
        for s in admissible {
            let v = self.q.combined(key, &s.action);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((s.action, v));
            }
        }
        best.map(|(a, _)| a)
    }

    /// `argmax_{a in A_eps(s)} Q(s, a) + Q'(s, a)`, ties to the first action
    /// in `(destination, dispense)` order.
    pub fn sample_policy(
        &self,
        state: &WorldState,
        config: &EnvConfig,
        epsilon: f64,
    ) -> Result<Action> {
        let scored = score_actions(state, config)?;
        let admissible = admissible_subset(&scored, epsilon);
        Ok(self
            .choose(&self.key(state), &admissible)
            .expect("admissible set is never empty"))
    }

    /// Rejects a model whose state keys cannot come from `config`.
    pub fn check_compatible(
        &self,
        config: &EnvConfig,
        level_params: Option<&LevelParams>,
    ) -> Result<()> {
        if let Some(p) = level_params {
            if p != self.level_params() {
                return Err(Error::ModelMismatch(format!(
                    "model level params {:?} differ from configured {:?}",
                    self.level_params(),
                    p
                )));
            }
        }
        if let Some(k) = self.q.qa.keys().chain(self.q.qb.keys()).next() {
            if k.levels.len() != config.num_villages() {
                return Err(Error::ModelMismatch(format!(
                    "model keys cover {} villages, configuration has {}",
                    k.levels.len(),
                    config.num_villages()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Convenience wrapper around [`QModel::sample_policy`].
pub fn sample_policy(
    model: &QModel,
    state: &WorldState,
    config: &EnvConfig,
    epsilon: f64,
) -> Result<Action> {
    model.sample_policy(state, config, epsilon)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    kind: PolicyKind,
    hyperparams: Hyperparams,
    avg_reward: f64,
    lagrange: Option<LagrangeState>,
    episodes_trained: usize,
    q: Vec<Entry>,
    q_prime: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    state: String,
    action: String,
    value: f64,
}

fn table_entries(table: &QTable<LevelisedState, Action>) -> Vec<Entry> {
    let mut rows: Vec<_> = table.iter().collect();
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    rows.into_iter()
        .map(|(k, a, v)| Entry {
            state: k.to_string(),
            action: a.to_string(),
            value: v,
        })
        .collect()
}

fn table_from_entries(entries: Vec<Entry>) -> Result<QTable<LevelisedState, Action>> {
    let mut table = QTable::new();
    for e in entries {
        let key: LevelisedState = e.state.parse().map_err(Error::MalformedModel)?;
        let action: Action = e.action.parse().map_err(Error::MalformedModel)?;
        table.set(&key, action, e.value);
    }
    Ok(table)
}

impl From<&QModel> for ModelFile {
    fn from(m: &QModel) -> Self {
        ModelFile {
            kind: m.kind,
            hyperparams: m.hyper.clone(),
            avg_reward: m.q.avg_reward,
            lagrange: m.lagrange,
            episodes_trained: m.episodes_trained,
            q: table_entries(&m.q.qa),
            q_prime: table_entries(&m.q.qb),
        }
    }
}

impl TryFrom<ModelFile> for QModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.kind == PolicyKind::Local {
            return Err(Error::MalformedModel(
                "the local policy has no model".into(),
            ));
        }
        f.hyperparams.validate()?;
        Ok(QModel {
            kind: f.kind,
            hyper: f.hyperparams,
            q: DoubleQ {
                qa: table_from_entries(f.q)?,
                qb: table_from_entries(f.q_prime)?,
                avg_reward: f.avg_reward,
            },
            lagrange: f.lagrange,
            episodes_trained: f.episodes_trained,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Node;

    fn sample_model() -> QModel {
        let mut m = QModel::new(PolicyKind::Ecadql, Hyperparams::default());
        let k1: LevelisedState = "0,3,2,2|-1|60000".parse().unwrap();
        let k2: LevelisedState = "1,1,6,2|3|15000".parse().unwrap();
        m.q.qa.set(
            &k1,
            Action::new(Node::Village(1), 15_000),
            0.123456789012345,
        );
        m.q.qa
            .set(&k2, Action::new(Node::Village(2), 15_000), -1.0 / 3.0);
        m.q.qb.set(&k1, Action::new(Node::Village(0), 0), 1e-17);
        m.q.avg_reward = 0.8123;
        m.lagrange = Some(LagrangeState {
            lambda: 2.5,
            r_hat: 0.81,
            v_hat: 0.04,
        });
        m.episodes_trained = 42;
        m
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = sample_model();
        let text = m.to_json().unwrap();
        let back = QModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(text.contains("\"state\": \"0,3,2,2|-1|60000\""));
        assert!(text.contains("\"action\": \"1,15000\""));
    }

    #[test]
    fn malformed_entries_rejected() {
        let text = sample_model()
            .to_json()
            .unwrap()
            .replace("0,3,2,2|-1|60000", "0,3|x");
        assert!(matches!(
            QModel::from_json(&text),
            Err(Error::MalformedModel(_))
        ));
    }

    #[test]
    fn zero_model_picks_first_admissible() {
        let c = EnvConfig::default_map();
        let m = QModel::new(PolicyKind::Eadql, Hyperparams::default());
        let s = c.start_state(vec![0.0, 300.0, 200.0, 200.0]);
        let scored = score_actions(&s, &c).unwrap();
        let first = admissible_subset(&scored, 0.1)[0].action;
        assert_eq!(m.sample_policy(&s, &c, 0.1).unwrap(), first);
    }

    #[test]
    fn q_values_steer_within_admissible_set() {
        let c = EnvConfig::default_map();
        let mut m = QModel::new(PolicyKind::Eadql, Hyperparams::default());
        let s = c.start_state(vec![0.0, 300.0, 200.0, 200.0]);
        let key = m.key(&s);
        // outside the 0.01-admissible set: ignored
        m.q.qa
            .set(&key, Action::new(Node::Village(1), 60_000), 100.0);
        m.q.qb.set(&key, Action::new(Node::Village(3), 30_000), 1.0);
        assert_eq!(
            m.sample_policy(&s, &c, 0.01).unwrap(),
            Action::new(Node::Village(3), 30_000)
        );
        assert_eq!(
            m.sample_policy(&s, &c, 1.0).unwrap(),
            Action::new(Node::Village(1), 60_000)
        );
        // shifting every value leaves the choice alone
        let mut shifted = m.clone();
        for a in crate::env::available_actions(&s, &c).unwrap() {
            shifted.q.qa.add(&key, a, 7.0);
        }
        assert_eq!(
            shifted.sample_policy(&s, &c, 1.0).unwrap(),
            Action::new(Node::Village(1), 60_000)
        );
        assert_eq!(
            shifted.sample_policy(&s, &c, 0.01).unwrap(),
            Action::new(Node::Village(3), 30_000)
        );
    }

    #[test]
    fn mismatch_detection() {
        let c = EnvConfig::default_map();
        let m = sample_model();
        assert!(m
            .check_compatible(&c, Some(&LevelParams::default()))
            .is_ok());
        let other = LevelParams {
            hidden_levels: 4,
            ..LevelParams::default()
        };
        assert!(matches!(
            m.check_compatible(&c, Some(&other)),
            Err(Error::ModelMismatch(_))
        ));
    }
}
