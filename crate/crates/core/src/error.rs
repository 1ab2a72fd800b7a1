use thiserror::Error;

/// Errors produced by game construction, solvers and learning.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The instance would not fit in the configured memory budget.
    #[error("budget exceeded: {what} needs {needed} entries, limit is {limit}")]
    Budget { what: &'static str, needed: u128, limit: u128 },

    /// The simplex method hit its iteration cap.
    #[error("LP solver stalled after {iterations} iterations")]
    Stalled { iterations: usize },

    /// A solver returned a verdict that the problem structure rules out.
    #[error("internal solver error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
