use thiserror::Error;

/// Errors raised by index evaluation, simulation and experiment plumbing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (empty arm list, bad parameter set, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed to converge or produced an inadmissible value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Monte Carlo output that cannot be trusted (too many capped paths).
    #[error("unreliable estimate: {0}")]
    Reliability(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by invalid input rather than by computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Config(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
