use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors are grouped by category so the CLI can report them uniformly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file row.
    #[error("{path}:{line}: {message}")]
    Ingest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Malformed snapshot, checkpoint or vocabulary.
    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Shape mismatch, empty input or other violated precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// NaN or infinity produced by a numeric op.
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("not found: {0}")]
    NotFound(String),

    /// A required artifact or setting is missing.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index build error: {0}")]
    Build(String),
}

impl Error {
    pub(crate) fn ingest(
        path: impl Into<PathBuf>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Ingest {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short category name, used by the CLI when reporting a failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Ingest { .. } => "ingest",
            Error::Format(_) | Error::Json(_) => "format",
            Error::Contract(_) => "contract",
            Error::NonFinite { .. } => "numeric",
            Error::NotFound(_) => "lookup",
            Error::Config(_) => "config",
            Error::Build(_) => "build",
        }
    }

    /// Process exit code for this category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::Ingest { .. } | Error::Format(_) | Error::Json(_) => 4,
            Error::Contract(_) | Error::NonFinite { .. } => 5,
            Error::NotFound(_) => 6,
            Error::Config(_) => 2,
            Error::Build(_) => 7,
        }
    }
}
