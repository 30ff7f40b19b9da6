use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("instance too large for exact enumeration: {entries:.3e} entries exceeds the limit of {limit:.0e}")]
    Infeasible { entries: f64, limit: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("outside the parameter regime: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
