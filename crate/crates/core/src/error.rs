use std::path::PathBuf;

use thiserror::Error;

/// Errors from parsing the binary artifacts (codebook, cache, tensor files).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated input: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("content hash mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    HashMismatch { stored: u64, computed: u64 },
    #[error("malformed field: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid source spec: {0}")]
    InvalidSpec(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient training data: {have} samples for {needed} codewords")]
    InsufficientTrainingData { have: usize, needed: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("corrupt record: {0}")]
    CorruptRecord(String),
    #[error("token {index} out of range for cache of {len} tokens")]
    OutOfRange { index: u64, len: u64 },
    #[error("codebook mismatch: cache expects {expected:#018x}, supplied {supplied:#018x}")]
    CodebookMismatch { expected: u64, supplied: u64 },
    #[error("codebook layout incompatible with fast encoder: {0}")]
    Layout(String),
    #[error("undefined result: {0}")]
    UndefinedResult(String),
    #[error(transparent)]
    Format(#[from] FormatError),
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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
