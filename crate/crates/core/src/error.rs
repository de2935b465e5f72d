use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("duration sampling for activity `{activity}` rejected {rejections} draws")]
    SamplingRejected { activity: String, rejections: usize },

    #[error("run {run} failed: {source}")]
    RunFailed {
        run: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold} failed: {source}")]
    FoldFailed {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("SVM solver did not converge after {iterations} iterations (KKT residual {residual:.3e})")]
    SvmNotConverged { iterations: usize, residual: f64 },

    #[error("backfitting did not converge after {cycles} cycles (last relative change {delta:.3e})")]
    BackfitNotConverged { cycles: usize, delta: f64 },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::InvalidInput(_) => {
                ErrorKind::Validation
            }
            Error::Io { .. } | Error::Csv(_) => ErrorKind::Io,
            Error::Json(e) if e.is_io() => ErrorKind::Io,
            Error::Json(_) => ErrorKind::Validation,
            Error::Numerical(_)
            | Error::SamplingRejected { .. }
            | Error::SvmNotConverged { .. }
            | Error::BackfitNotConverged { .. } => ErrorKind::Numerical,
            Error::RunFailed { source, .. } | Error::FoldFailed { source, .. } => source.kind(),
        }
    }
}
