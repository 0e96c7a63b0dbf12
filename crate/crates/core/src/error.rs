use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("enumeration bound exceeded: {0}")]
    Resource(String),
    #[error("pole: {0}")]
    Pole(String),
    #[error("branch undefined: {0}")]
    BranchUndefined(String),
    #[error("singular inverse: {0}")]
    SingularInverse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("outside supported regime: {0}")]
    Regime(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
