use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("gapless: {0}")]
    Gapless(String),
    #[error("resonant energy: {0}")]
    ResonantEnergy(String),
    #[error("ambiguous index: {0}")]
    AmbiguousIndex(String),
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("numerical range exceeded: {0}")]
    Overflow(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
