use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integration step {dt} s is outside (0, {max}] s")]
    InvalidTimeStep { dt: f64, max: f64 },

    #[error("demonstration covers {got:.4} s but one period needs {needed:.4} s")]
    DemoTooShort { got: f64, needed: f64 },

    #[error("a demonstration needs at least {needed} repetitions, got {got}")]
    TooFewRepetitions { got: usize, needed: usize },

    #[error("need at least {needed} waypoints, got {got}")]
    TooFewWaypoints { got: usize, needed: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel matrix is not positive definite even with noise variance {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("play data has {frames} frames, shorter than segment length {segment_len}")]
    PlayTooShort { frames: usize, segment_len: usize },

    #[error("no imagined trajectory accepted after {attempts} attempts (d_seg = {d_seg:.4} m)")]
    NoImaginedTrajectory { attempts: usize, d_seg: f64 },

    #[error("requested {requested} items from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("keypoint count mismatch: {left} vs {right}")]
    KeypointCountMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no reliable periodicity (autocorrelation peak {confidence:.3})")]
    NoPeriodicity { confidence: f64 },

    #[error("period of {period_frames:.2} frames exceeds video length {frames}")]
    PeriodTooLong { period_frames: f64, frames: usize },

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("environment failure at trial {trial}: {reason}")]
    Environment { trial: usize, reason: String },

    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
