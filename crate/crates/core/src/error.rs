use thiserror::Error;

/// Errors raised across the library.
///
/// Each variant maps onto one of the CLI exit codes, see [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed user input: weight files, exponents, scheme parameters.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A dense path was asked to handle more than it is sized for.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An operation was called with the wrong operator representation or scheme.
    #[error("usage error: {0}")]
    Usage(String),

    /// An internal consistency check failed.
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Domain(_) | Error::Usage(_) => 2,
            Error::Capacity(_) => 3,
            Error::Internal(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
