use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A transformed-rate logarithm or square root left its domain at link (m, k).
    #[error("domain error at link ({bs}, {user}): {what}")]
    Domain {
        bs: usize,
        user: usize,
        what: String,
    },

    #[error("untrained model: {0}")]
    Untrained(String),

    #[error(transparent)]
    Autodiff(#[from] AdError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
