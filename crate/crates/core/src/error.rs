use serde::Serialize;
use thiserror::Error;

/// A condition a correct protocol run never reaches.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum Fault {
    #[error("received {0} pulses for one trit")]
    TritOverflow(u32),
    #[error("malformed traversal pair ({first}, {second})")]
    MalformedTraversalPair { first: usize, second: usize },
    #[error("adjacent processes share color {0}")]
    ColorCollision(u64),
    #[error("process {0} left the independent set without a member neighbour")]
    NotMaximal(u64),
    #[error("no active process")]
    NoActiveProcess,
    #[error("round limit {0} exceeded")]
    RoundLimitExceeded(usize),
    #[error("cannot decode message: {0}")]
    Decode(String),
}
