use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors are split by who is at fault: bad input (`Invalid`), geometry that
/// violates the standing hypotheses (`Geometry`), or a numerical procedure
/// that did not deliver (`Solver`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Geometry(String),
    #[error("{0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
