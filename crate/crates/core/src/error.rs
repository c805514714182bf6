use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("outside supported regime: {0}")]
    Regime(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("estimator aborted: {0}")]
    Aborted(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn regime<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Regime(msg.into()))
}
