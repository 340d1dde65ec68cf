use std::path::PathBuf;

use thiserror::Error;

/// Broad failure classes; the CLI maps each to an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    SystematicDifferences,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error(
        "none of the {0} minority-group rows has a cross-group candidate; \
         systematic differences are too severe for counterpart analysis"
    )]
    NoCounterparts(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("metric learning diverged at iteration {iteration}")]
    Diverged { iteration: usize },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::NoCounterparts(_) => ErrorKind::SystematicDifferences,
            Error::Numerical(_) | Error::Diverged { .. } => ErrorKind::Numerical,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Data(_)
            | Error::UnknownColumn(_)
            | Error::DimensionMismatch { .. }
            | Error::Empty(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
