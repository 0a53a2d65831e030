use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error (record {record}): {field}: {message}")]
    Validation {
        record: usize,
        field: &'static str,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("feature store integrity error: {0}")]
    Integrity(String),

    #[error("feature store format error: {0}")]
    Format(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("checkpoint load error: {0}")]
    Checkpoint(String),

    #[error("non-finite value in `{tensor}` ({detail})")]
    NonFinite { tensor: String, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(record: usize, field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            record,
            field,
            message: message.into(),
        }
    }
}
