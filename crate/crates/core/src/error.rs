use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, or content).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The overheard covariance has no null subspace to steer into.
    #[error("insufficient spatial DoF: {antennas} secondary antennas leave no null subspace")]
    InsufficientDof { antennas: usize },

    #[error("no overheard samples")]
    NoOverheardSamples,

    /// Scenario validation failure, naming the offending field.
    #[error("invalid scenario field `{field}`: {reason}")]
    Scenario { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
