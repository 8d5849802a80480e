use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An inner solver failed to reach its tolerance.
    #[error("numerical failure in {context}: residual {residual:e} after {iterations} iterations")]
    NumericalFailure {
        context: String,
        residual: f64,
        iterations: usize,
    },
    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
