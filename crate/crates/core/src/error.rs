use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown entity id {id:?} referenced by {context}")]
    Referential { id: String, context: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("duplicate key {0:?}")]
    DuplicateKey(String),

    #[error("missing key {0:?}")]
    MissingKey(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short, stable category name used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Referential { .. } => "referential",
            Error::InvalidData(_) => "invalid_data",
            Error::Format(_) => "format",
            Error::DuplicateKey(_) => "duplicate_key",
            Error::MissingKey(_) => "missing_key",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimMismatch(_) => "dim_mismatch",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Numeric(_) => 4,
            _ => 3,
        }
    }
}
