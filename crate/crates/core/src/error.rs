use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract data (non-finite coordinates, empty distributions, bad shapes).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric or structural parameter outside its allowed range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Kernel rows with no nonzero entry.
    #[error("degenerate nodes with zero total affinity: {indices:?}")]
    DegenerateNode { indices: Vec<usize> },

    /// An iterative or factorization routine failed to reach its tolerance.
    #[error("numerical failure in {stage}: {detail}")]
    Numerical { stage: &'static str, detail: String },

    /// Objects combined in an inconsistent way.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A valid request that this code path does not support.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Correlation requested on a constant sequence.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Text or binary decoding failure.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
