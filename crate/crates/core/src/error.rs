use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("emotion sets differ: {0}")]
    EmotionSetMismatch(String),

    #[error("no events of label {0:?}")]
    NoEvents(String),

    #[error("non-finite value at event {index}: {message}")]
    NonFinite { index: usize, message: String },

    #[error("thinning bound violated at t={time}: intensity {intensity} > bound {bound}")]
    BoundViolated { time: f64, intensity: f64, bound: f64 },

    #[error("simulation aborted after {events} events at t={time}; spectral radius {spectral_radius:.4} (explosive regime?)")]
    Supercritical {
        events: usize,
        time: f64,
        spectral_radius: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the inputs (files, labels, arguments)
    /// rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::UnknownLabel { .. }
                | Error::InvalidInput(_)
                | Error::EmotionSetMismatch(_)
                | Error::NoEvents(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
