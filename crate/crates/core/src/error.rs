use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlzError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sector: {0}")]
    EmptySector(String),

    #[error("degenerate crossing diagram: {0}")]
    Degenerate(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invalid model file: {0}")]
    InvalidModelFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MlzError>;
