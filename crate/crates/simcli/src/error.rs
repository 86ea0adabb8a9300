use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] splitlrt::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type SimResult<T> = Result<T, SimError>;

impl SimError {
    /// Process exit code: 2 for bad configuration, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Config(_) => 2,
            SimError::Core(e) if e.is_numerical() => 3,
            SimError::Core(_) => 2,
            SimError::Io(_) | SimError::Csv(_) => 1,
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}
