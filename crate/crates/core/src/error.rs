use thiserror::Error;

/// Errors raised while building measures, spaces and checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected} nodes, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("weight is not finite at node {node}")]
    NonFiniteWeight { node: usize },

    #[error("precondition violated at node {node}: {reason}")]
    PreconditionViolated { node: usize, reason: String },

    #[error("the set Omega covers every node; it must be a proper subset")]
    OmegaCoversSpace,

    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
