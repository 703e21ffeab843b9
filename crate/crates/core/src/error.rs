use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
///
/// Variant names double as the stable error identifiers printed by the CLI,
/// so renaming one is a breaking change for scripts that grep stderr.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ParseError at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("ParseError at row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("InsufficientData: {0}")]
    InsufficientData(String),

    #[error("LagOutOfRange: lag {lag} requires lag < T = {t_len}")]
    LagOutOfRange { lag: usize, t_len: usize },

    #[error("UnsupportedModel: {0}")]
    UnsupportedModel(String),

    #[error("NonStationaryModel: {0}")]
    NonStationaryModel(String),

    #[error("BandwidthTooLarge: B_T = {bandwidth} must be below T = {t_len}")]
    BandwidthTooLarge { bandwidth: usize, t_len: usize },

    #[error("InvalidLevel: {0} is not in (0, 1)")]
    InvalidLevel(f64),

    #[error("DegenerateSpectrum: nonpositive diagonal f[{index}][{index}] = {value:e} at frequency {freq}")]
    DegenerateSpectrum { freq: f64, index: usize, value: f64 },

    #[error("BandUndefined: {0}")]
    BandUndefined(String),

    #[error("InsufficientInnerReps: nonlinear models need inner_reps >= 50, got {0}")]
    InsufficientInnerReps(usize),

    #[error("InvalidKernel: {0}")]
    InvalidKernel(String),

    #[error("InvalidInput: {0}")]
    InvalidInput(String),

    #[error("InvalidPlan: {0}")]
    InvalidPlan(String),

    #[error("IoError on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("SerializationError: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that stem from a malformed request rather than from the data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidLevel(_) | Error::InvalidPlan(_) | Error::InvalidInput(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
