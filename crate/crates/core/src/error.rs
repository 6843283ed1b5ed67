use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    DegenerateTraining,
    Contract,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("segment [{start}, {end}) does not fit in a signal of {len} samples")]
    Boundary { start: i64, end: i64, len: usize },

    #[error("training set is empty: no fall or ADL segments were extracted")]
    EmptyTrainingSet,

    #[error("training set contains a single class ({0}); both falls and ADL windows are required")]
    DegenerateTraining(&'static str),

    #[error("feature spec error: {0}")]
    Spec(String),

    #[error("window length mismatch: model expects {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("unsupported model format version {found} (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },

    #[error("corrupt model payload: {0}")]
    Corrupt(String),

    #[error("signal of {len} samples is shorter than one window ({window} samples)")]
    TooShort { len: usize, window: usize },

    #[error("threshold {0} outside (0, 1]")]
    Threshold(f64),

    #[error("invalid gain matrix: {0}")]
    GainMatrix(String),

    #[error("cannot split {subjects} subjects into {folds} folds")]
    Split { subjects: usize, folds: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("fall placement failed: {0}")]
    Placement(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Corrupt(_) | Error::Version { .. } => {
                ErrorKind::Io
            }
            Error::EmptyTrainingSet | Error::DegenerateTraining(_) => ErrorKind::DegenerateTraining,
            Error::Config(_)
            | Error::Spec(_)
            | Error::Threshold(_)
            | Error::GainMatrix(_)
            | Error::Split { .. }
            | Error::Placement(_) => ErrorKind::Config,
            Error::InvalidSample(_)
            | Error::InvalidSignal(_)
            | Error::Boundary { .. }
            | Error::Shape { .. }
            | Error::TooShort { .. }
            | Error::Domain(_)
            | Error::Contract(_) => ErrorKind::Contract,
        }
    }
}
