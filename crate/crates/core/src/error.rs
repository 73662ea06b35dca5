use thiserror::Error;

/// Errors raised by the wire models, the hybrid integrator and the tooling
/// built on top of them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("phase fraction {0} outside [0, 1]")]
    PhaseFractionDomain(f64),

    #[error("singular denominator in {what} (|value| = {value:e})")]
    Singular { what: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("jump {jump} applied outside its jump set (guard residual {residual:e})")]
    JumpPrecondition { jump: String, residual: f64 },

    #[error("degenerate kinematics: wire length {0:e} m")]
    DegenerateLength(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
