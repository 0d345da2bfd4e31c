use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}: {error}")]
    Io {
        source_name: String,
        #[source]
        error: std::io::Error,
    },
    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("index format error: {0}")]
    Format(String),
    #[error("unsupported index format version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },
    #[error("index checksum mismatch: file is truncated or corrupt")]
    Checksum,
    #[error("document id {0:?} appears twice with different text")]
    DuplicateDocId(String),
    #[error("corpus is empty after deduplication and tokenization")]
    EmptyCorpus,
    #[error("empty query after processing")]
    EmptyQuery,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("text processing config mismatch: index was built with fingerprint {index:016x}, request uses {request:016x}")]
    ConfigMismatch { index: u64, request: u64 },
    #[error("{0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(source_name: impl Display, error: std::io::Error) -> Self {
        Error::Io { source_name: source_name.to_string(), error }
    }

    pub(crate) fn parse(source_name: impl Display, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { source_name: source_name.to_string(), line, message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
