use thiserror::Error;

use crate::space::Context;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the bridge to an external model host.
#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("failed to spawn bridge process `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bridge handshake failed: {0}")]
    Handshake(String),
    #[error("bridge declared p={declared} but the space has p={expected}")]
    DimensionMismatch { declared: usize, expected: usize },
    #[error("bridge protocol violation: {0}")]
    Protocol(String),
    #[error("bridge did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("bridge reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("bridge i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("feature index {index} out of range for p={p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("feature set must not be empty")]
    EmptySet,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("invalid step for feature {index}: {step}")]
    InvalidStep { index: usize, step: f64 },
    #[error("feature {0} is inert (target equals baseline)")]
    InertFeature(usize),
    #[error("pair ({0}, {0}) is not a pair of distinct features")]
    DegeneratePair(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("exhaustive enumeration over p={p} exceeds the cap of {cap}")]
    Capacity { p: usize, cap: usize },
    #[error("evaluation failed for mask {mask}: {source}")]
    Evaluation {
        mask: String,
        #[source]
        source: EvalFailure,
    },
    #[error("evaluator is not deterministic: probe {mask} gave {first} then {second}")]
    Nondeterministic { mask: String, first: f64, second: f64 },
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },
}

/// Failure reported by an [`Evaluator`](crate::blackbox::Evaluator).
#[derive(Debug, Error)]
pub enum EvalFailure {
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("{0}")]
    Message(String),
}

impl Error {
    pub(crate) fn evaluation(ctx: &Context, source: EvalFailure) -> Self {
        Error::Evaluation {
            mask: ctx.to_string(),
            source,
        }
    }

    /// True when the failure came from evaluating the black box (as opposed
    /// to bad arguments or capacity limits).
    pub fn is_evaluation(&self) -> bool {
        matches!(
            self,
            Error::Evaluation { .. } | Error::Nondeterministic { .. } | Error::Bridge(_)
        )
    }
}
