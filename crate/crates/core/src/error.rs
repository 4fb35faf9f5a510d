use thiserror::Error;

/// Broad failure classes. The CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input or I/O trouble.
    Input,
    /// A documented precondition of the operation does not hold.
    Precondition,
    /// A finite horizon or enumeration budget ran out.
    Exhausted,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("index {index} is below the start index {start}")]
    IndexBelowStart { index: u64, start: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("horizon exhausted: {0}")]
    Horizon(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } => ErrorClass::Input,
            Error::IndexBelowStart { .. }
            | Error::DimensionMismatch { .. }
            | Error::Precondition(_)
            | Error::Empty(_) => ErrorClass::Precondition,
            Error::Budget(_) | Error::Horizon(_) => ErrorClass::Exhausted,
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
