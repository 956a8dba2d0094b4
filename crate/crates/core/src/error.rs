use thiserror::Error;

/// Errors raised by the library. Property violations found by the checkers
/// are reported as data, never as errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("argument outside the function domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("measures must sum to one: {0}")]
    Balance(String),
    #[error("problem too large: {0}")]
    Scale(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("decision function is not anti-symmetric: {0}")]
    AntiSymmetry(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("missing reduction metadata: {0}")]
    Metadata(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn range_err(msg: impl Into<String>) -> Error {
    Error::Range(msg.into())
}
