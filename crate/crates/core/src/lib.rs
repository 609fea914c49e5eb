//! Value-aligned water distribution.
//!
//! A tanker truck distributes water to villages over a directed road
//! network. Each state is scored by its equity (one minus the Gini index of
//! the per-person water distribution). On top of that world this crate
//! provides:
//!
//! - [`admissibility`]: one-step lookahead scoring, epsilon-admissible
//!   action sets, the local (greedy-equity) policy and tau violations;
//! - [`learner`]: average-reward double Q-learning restricted to
//!   epsilon-admissible actions, and its Lagrangian constrained variant;
//! - [`eval`]: greedy evaluation, aggregates over random initial states and
//!   CSV export.

pub mod admissibility;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod learner;
pub mod semantics;

pub use config::{EvalConfig, ExperimentConfig};
pub use env::{Action, EnvConfig, Episode, Node, StepOutcome, VillageSpec, WorldState};
pub use error::{Error, Result};
pub use learner::{Hyperparams, PolicyKind, QModel};
