use thiserror::Error;

/// Errors produced anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical overflow at t = {t}: non-finite state")]
    Overflow { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed binary input at byte offset {offset}: {msg}")]
    Corrupt { offset: u64, msg: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. } | Error::StepUnderflow { .. } | Error::Calibration(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
