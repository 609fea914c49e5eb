//! State levelisation, the double Q model, and the two training algorithms.

mod double_q;
mod lagrange;
mod levels;
mod model;
mod params;
mod train;

pub use double_q::{DoubleQ, QTable, Updated};
pub use lagrange::{shaped_reward, LagrangeState};
pub use levels::{LevelParams, LevelisedState};
pub use model::{sample_policy, QModel};
pub use params::{Hyperparams, PolicyKind};
pub use train::{
    train, train_eadql, train_ecadql, train_observed, EpisodeRecord, StepRecord, TrainObserver,
};

/// Levelise a world state under `params`.
pub fn levelise(state: &crate::env::WorldState, params: &LevelParams) -> LevelisedState {
    params.levelise(state)
}
