use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("stale probes: trained against base {expected}, scoring base {found}")]
    StaleProbe { expected: String, found: String },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("incompatible artifact {path}: {message}")]
    IncompatibleArtifact { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(row: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            row,
            message: msg.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: msg.into(),
        }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => 2,
            Error::Io { .. } | Error::Format { .. } | Error::IncompatibleArtifact { .. } => 3,
            Error::StaleProbe { .. } => 3,
            Error::DegenerateLabels(_) | Error::TrainingDiverged { .. } => 4,
        }
    }
}
