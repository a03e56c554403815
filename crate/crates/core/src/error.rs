use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("mollifier under-resolved: epsilon {epsilon} < grid spacing {spacing}")]
    UnderResolvedKernel { epsilon: f64, spacing: f64 },

    #[error("drift evaluation failed at t={t}, x={x:?}: {detail}")]
    DriftEvaluation { t: f64, x: Vec<f64>, detail: String },

    #[error("unsupported drift for this operation: {0}")]
    UnsupportedDrift(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("time {t} outside path horizon [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("CFL violation at step {step}: number {number:.4} exceeds {limit}")]
    Cfl { step: usize, number: f64, limit: f64 },

    #[error("non-finite field value at step {step}")]
    BlowUp { step: usize },

    #[error("characteristic left the trusted region (|X| = {radius:.3e}) at s = {s}")]
    CharacteristicDiverged { radius: f64, s: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration-class errors are the ones a user fixes by editing the
    /// config or inputs; everything else is a runtime/numeric failure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidGrid(_)
                | Error::UnderResolvedKernel { .. }
                | Error::UnsupportedDrift(_)
                | Error::MeshMismatch(_)
                | Error::Cfl { .. }
                | Error::Parse(_)
                | Error::Json(_)
        )
    }
}
