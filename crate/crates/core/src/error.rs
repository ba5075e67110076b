use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} id: {id}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("ragged input: {0}")]
    Ragged(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("filtering removed every {0}")]
    EmptyAfterFilter(&'static str),

    #[error("SNP {0} has zero pooled coverage")]
    ZeroCoverage(String),

    #[error("non-finite likelihood: {0}")]
    NonFinite(String),

    #[error("could not initialise chain after {0} prior draws")]
    InitFailed(usize),

    #[error("posterior chain is empty")]
    EmptyChain,

    #[error("fit failed for sample {sample} (k={k}, {restriction}): {source}")]
    Fit {
        sample: String,
        k: usize,
        restriction: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
