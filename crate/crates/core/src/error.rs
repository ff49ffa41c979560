use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A size limit was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The matrix passed to an extremeness test is not in the polytope.
    #[error("matrix is not a member of {0}")]
    NotMember(String),

    /// An internal invariant failed; the message carries a diagnostic dump.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
