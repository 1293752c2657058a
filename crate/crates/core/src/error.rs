use thiserror::Error;

/// Errors produced by the inexact-computing models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A problem descriptor could not be turned into a problem.
    #[error("cannot construct problem: {0}")]
    Construction(String),

    /// An exact enumeration or group materialization would exceed its size guard.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A quality metric was paired with a problem or decoder it is not defined for.
    #[error("metric mismatch: {0}")]
    MetricMismatch(String),

    #[error("malformed truth table: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn too_large(msg: impl Into<String>) -> Error {
    Error::ResourceLimit(msg.into())
}
