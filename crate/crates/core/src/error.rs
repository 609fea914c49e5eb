use thiserror::Error;

use crate::env::{Action, Node};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// No legal action exists from a non-terminal state. This points at a
    /// malformed road network rather than a policy bug.
    #[error("no available actions at position {position} with load {load}")]
    EmptyActionSet { position: Node, load: u64 },

    #[error("illegal action {action} from position {position} with load {load}")]
    IllegalAction {
        action: Action,
        position: Node,
        load: u64,
    },

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("model does not match configuration: {0}")]
    ModelMismatch(String),

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
