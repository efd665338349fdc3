//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("row {row}: {message}")]
    Record { row: usize, message: String },

    #[error("no records: {0}")]
    Empty(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("collinear design: {0}")]
    Collinear(String),

    #[error("solver diverged ({context}) after {iterations} iterations; likely separation or monotone likelihood")]
    Divergence { context: String, iterations: usize },

    #[error("task mismatch: locked threshold is for '{locked}', got '{requested}'")]
    TaskMismatch { locked: String, requested: String },

    #[error("policy '{0}' cannot be selected on a plain threshold sweep; use the second-review sweep")]
    UnsupportedPolicy(String),

    #[error("registry: {0}")]
    Registry(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
