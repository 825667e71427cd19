use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("site index {index} out of range for {n} sites")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("site {0} is not attached")]
    NotAttached(usize),

    #[error("site {0} is not detached")]
    NotDetached(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("quadrature rule cannot integrate this function: {0}")]
    QuadratureUnsupported(String),

    #[error("time {t} outside trajectory range [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("trajectory horizon {horizon} s is shorter than required {required} s")]
    InsufficientHorizon { horizon: f64, required: f64 },

    #[error("no snapshot recorded at t = {0} s")]
    MissingSnapshot(f64),

    #[error("trajectory would exceed the storage budget of {limit} states; use summary mode")]
    TrajectoryTooLarge { limit: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
