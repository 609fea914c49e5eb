//! Behaviour machinery over one-step lookahead: scoring every legal action by
//! the alignment of the state it leads to, the epsilon-admissible subset, the
//! local (greedy-alignment) policy, and the tau-violation predicate.

use crate::env::{available_actions, transition, Action, EnvConfig, WorldState};
use crate::error::{Error, Result};
use crate::semantics::f_gini;

/// A legal action together with the alignment of its successor state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredAction {
    pub action: Action,
    pub successor_alignment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviourParams {
    pub epsilon: f64,
    pub tau: f64,
}

impl BehaviourParams {
    pub fn new(epsilon: f64, tau: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in (0, 1), got {tau}"
            )));
        }
        Ok(Self { epsilon, tau })
    }
}

/// Every legal action from `state`, scored, in `(destination, dispense)` order.
pub fn score_actions(state: &WorldState, config: &EnvConfig) -> Result<Vec<ScoredAction>> {
    Ok(available_actions(state, config)?
        .into_iter()
        .map(|action| ScoredAction {
            action,
            successor_alignment: f_gini(&transition(state, &action, config), &config.villages),
        })
        .collect())
}

/// Highest successor alignment, or `-inf` for an empty slice.
pub fn best_alignment(scored: &[ScoredAction]) -> f64 {
    scored
        .iter()
        .map(|s| s.successor_alignment)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The members of `scored` whose alignment is within `epsilon` of the best,
/// order preserved. Non-empty whenever `scored` is.
pub fn admissible_subset(scored: &[ScoredAction], epsilon: f64) -> Vec<ScoredAction> {
    let floor = best_alignment(scored) - epsilon;
    scored
        .iter()
        .filter(|s| s.successor_alignment >= floor)
        .copied()
        .collect()
}

/// Actions from `state` that an epsilon-local policy may take.
pub fn epsilon_admissible(
    state: &WorldState,
    config: &EnvConfig,
    epsilon: f64,
) -> Result<Vec<Action>> {
    let scored = score_actions(state, config)?;
    Ok(admissible_subset(&scored, epsilon)
        .into_iter()
        .map(|s| s.action)
        .collect())
}

/// First maximiser of the successor alignment.
pub fn local_choice(scored: &[ScoredAction]) -> Option<&ScoredAction> {
    let mut best: Option<&ScoredAction> = None;
    for s in scored {
        if best.is_none_or(|b| s.successor_alignment > b.successor_alignment) {
            best = Some(s);
        }
    }
    best
}

/// The local policy: maximise next-state alignment, ties to the first
/// action in `(destination, dispense)` order.
pub fn local_policy(state: &WorldState, config: &EnvConfig) -> Result<Action> {
    let scored = score_actions(state, config)?;
    Ok(local_choice(&scored)
        .expect("score_actions never returns an empty list")
        .action)
}

/// A transition violates the tau constraint when its successor falls
/// strictly below `tau`.
pub fn is_violation(next_alignment: f64, tau: f64) -> bool {
    next_alignment < tau
}

pub fn count_violations(alignments: impl IntoIterator<Item = f64>, tau: f64) -> usize {
    alignments
        .into_iter()
        .filter(|&a| is_violation(a, tau))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Node;
    use proptest::prelude::*;

    fn scored(values: &[f64]) -> Vec<ScoredAction> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| ScoredAction {
                action: Action::new(Node::Village(1), 15_000 * i as u64),
                successor_alignment: v,
            })
            .collect()
    }

    /// The default villages with a road from the source to village 0 and
    /// zero deliveries allowed, so every destination and amount is on offer.
    fn open_map() -> EnvConfig {
        let mut c = EnvConfig::default_map();
        let mut edges = c.network.edges().to_vec();
        edges.push((Node::Source, Node::Village(0)));
        c.network = crate::env::RoadNetwork::new(4, edges).unwrap();
        c.allow_zero_dispense = true;
        c
    }

    fn eval_start(c: &EnvConfig) -> WorldState {
        c.start_state(vec![0.0, 300.0, 200.0, 200.0])
    }

    #[test]
    fn evaluation_start_table() {
        // independent enumeration over the per-person expansion
        let expected = [
            (Node::Village(0), 0, 0.9277205296886958),
            (Node::Village(0), 15_000, 0.9245861568228301),
            (Node::Village(0), 30_000, 0.8967725935784849),
            (Node::Village(0), 45_000, 0.8706020163880333),
            (Node::Village(0), 60_000, 0.845933021486748),
            (Node::Village(1), 0, 0.9277205296886958),
            (Node::Village(1), 15_000, 0.9022280398908528),
            (Node::Village(1), 30_000, 0.8782794266553791),
            (Node::Village(1), 45_000, 0.855738561670286),
            (Node::Village(1), 60_000, 0.8344848634842501),
            (Node::Village(3), 0, 0.9277205296886958),
            (Node::Village(3), 15_000, 0.9431502390337868),
            (Node::Village(3), 30_000, 0.9349509486579354),
            (Node::Village(3), 45_000, 0.9272336292658514),
            (Node::Village(3), 60_000, 0.9199569973676051),
        ];
        let c = open_map();
        let got = score_actions(&eval_start(&c), &c).unwrap();
        assert_eq!(got.len(), expected.len());
        for (g, (dest, d, v)) in got.iter().zip(expected) {
            assert_eq!(g.action, Action::new(dest, d));
            assert!((g.successor_alignment - v).abs() < 1e-12, "{:?} vs {v}", g);
        }
        assert_eq!(
            local_policy(&eval_start(&c), &c).unwrap(),
            Action::new(Node::Village(3), 15_000)
        );

        // the default map has no road from the source to village 0 and a
        // loaded truck always delivers
        let d = EnvConfig::default_map();
        let got = score_actions(&eval_start(&d), &d).unwrap();
        let rows: Vec<_> = expected
            .iter()
            .filter(|e| e.0 != Node::Village(0) && e.1 > 0)
            .collect();
        assert_eq!(got.len(), rows.len());
        for (g, &&(dest, amount, v)) in got.iter().zip(&rows) {
            assert_eq!(g.action, Action::new(dest, amount));
            assert!((g.successor_alignment - v).abs() < 1e-12);
        }
        assert_eq!(
            local_policy(&eval_start(&d), &d).unwrap(),
            Action::new(Node::Village(3), 15_000)
        );
    }

    #[test]
    fn scored_sets_follow_road_rules() {
        let c = EnvConfig::default_map();
        // a loaded truck may not head back to the source
        let s = WorldState {
            levels: vec![10.0; 4],
            position: Node::Village(3),
            load: 30_000,
            distributed_total: 0,
        };
        let got = score_actions(&s, &c).unwrap();
        assert!(got.iter().all(|a| a.action.destination != Node::Source));
        // village 1 has no road to the source, so an empty truck moves on
        let at_v1 = WorldState {
            position: Node::Village(1),
            load: 0,
            ..s
        };
        let only = score_actions(&at_v1, &c).unwrap();
        assert_eq!(
            only.iter().map(|a| a.action).collect::<Vec<_>>(),
            vec![
                Action::new(Node::Village(0), 0),
                Action::new(Node::Village(2), 0),
                Action::new(Node::Village(3), 0)
            ]
        );
        let at_v2 = WorldState {
            position: Node::Village(2),
            load: 0,
            ..at_v1
        };
        let single = score_actions(&at_v2, &c).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(local_policy(&at_v2, &c).unwrap(), Action::refill());
    }

    #[test]
    fn scoring_is_pure() {
        let c = EnvConfig::default_map();
        let s = eval_start(&c);
        assert_eq!(
            score_actions(&s, &c).unwrap(),
            score_actions(&s, &c).unwrap()
        );
    }

    #[test]
    fn epsilon_threshold_arithmetic() {
        let set = scored(&[0.80, 0.75, 0.69]);
        let adm = admissible_subset(&set, 0.1);
        assert_eq!(adm, set[..2].to_vec());
    }

    #[test]
    fn epsilon_one_admits_everything() {
        let c = EnvConfig::default_map();
        let s = eval_start(&c);
        let all = available_actions(&s, &c).unwrap();
        assert_eq!(epsilon_admissible(&s, &c, 1.0).unwrap(), all);
    }

    #[test]
    fn epsilon_zero_is_argmax_set() {
        let c = EnvConfig {
            allow_zero_dispense: true,
            ..EnvConfig::default_map()
        };
        let mut s = eval_start(&c);
        s.levels = vec![0.0; 4];
        // with every village dry, all zero deliveries tie at the top
        assert_eq!(
            epsilon_admissible(&s, &c, 0.0).unwrap(),
            vec![
                Action::new(Node::Village(1), 0),
                Action::new(Node::Village(3), 0)
            ]
        );
        let d = EnvConfig::default_map();
        assert_eq!(
            epsilon_admissible(&eval_start(&d), &d, 0.0).unwrap(),
            vec![Action::new(Node::Village(3), 15_000)]
        );
    }

    #[test]
    fn violation_boundary() {
        assert!(is_violation(0.69, 0.7));
        assert!(!is_violation(0.70, 0.7));
        assert_eq!(count_violations([0.9, 0.5, 0.7, 0.69999], 0.7), 2);
    }

    #[test]
    fn behaviour_params_validation() {
        assert!(BehaviourParams::new(0.1, 0.7).is_ok());
        assert!(BehaviourParams::new(-0.1, 0.7).is_err());
        assert!(BehaviourParams::new(0.1, 0.0).is_err());
        assert!(BehaviourParams::new(0.1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_epsilon(values in prop::collection::vec(0.0f64..1.0, 1..12), e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let set = scored(&values);
            let small = admissible_subset(&set, lo);
            let large = admissible_subset(&set, hi);
            prop_assert!(!small.is_empty());
            prop_assert!(small.iter().all(|a| large.contains(a)));
            let best = local_choice(&set).unwrap();
            prop_assert!(small.contains(best));
        }

        #[test]
        fn argmax_survives_monotone_transform(values in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let set = scored(&values);
            let transformed: Vec<_> = set
                .iter()
                .map(|s| ScoredAction { successor_alignment: (3.0 * s.successor_alignment).exp(), ..*s })
                .collect();
            prop_assert_eq!(local_choice(&set).unwrap().action, local_choice(&transformed).unwrap().action);
        }

        #[test]
        fn states_from_random_levels(levels in prop::collection::vec(0.0f64..600.0, 4), eps in 0.0f64..0.3) {
            let c = EnvConfig::default_map();
            let s = c.start_state(levels);
            let adm = epsilon_admissible(&s, &c, eps).unwrap();
            prop_assert!(!adm.is_empty());
            prop_assert!(adm.contains(&local_policy(&s, &c).unwrap()));
        }
    }
}
