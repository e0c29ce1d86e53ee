use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("signature '{0}' has no minutiae")]
    EmptySignature(String),

    #[error("invalid record id {0:?}")]
    InvalidRecordId(String),

    #[error("minutia ({x}, {y}) lies outside the bounding box")]
    OutsideBox { x: u32, y: u32 },

    #[error("duplicate record id '{0}'")]
    DuplicateRecord(String),

    #[error("record '{0}' is not present in the signature store")]
    UnknownRecord(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("corpus of {n} records exceeds the exhaustive comparison cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
