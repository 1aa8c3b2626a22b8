use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sign mismatch: phi = {phi} and delta = {delta} must share a sign")]
    SignMismatch { phi: f64, delta: f64 },

    #[error("detuning {delta} outside the allowed band ({lo}, {hi}) for gT = {duration}")]
    DetuningOutOfBand {
        delta: f64,
        lo: f64,
        hi: f64,
        duration: f64,
    },

    #[error("drive strength |zeta| = {zeta_abs} reaches g/2 at t = {t}")]
    DriveTooStrong { zeta_abs: f64, t: f64 },

    #[error("basis mismatch: expected N = {expected}, got N = {found}")]
    BasisMismatch { expected: usize, found: usize },

    #[error("dimension too large: N = {n}, limit {limit}")]
    DimensionTooLarge { n: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
