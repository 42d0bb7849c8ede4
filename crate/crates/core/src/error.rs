use thiserror::Error;

use crate::al::AlFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sample has no spread left to estimate from.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The asymptotic-likelihood fit could not produce a usable estimate.
    /// `best` carries the best point visited, when one exists.
    #[error("fit failed: {reason}")]
    Fit {
        reason: String,
        best: Option<Box<AlFit>>,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("table build failed: {0}")]
    TableBuild(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
