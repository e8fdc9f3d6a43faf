use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient replications: need at least {needed}, got {got}")]
    InsufficientReplications { needed: u64, got: u64 },

    #[error("position overflow at step {step}")]
    PositionOverflow { step: u64 },

    #[error("scaling too small: m_n = {m_n} (need at least 2)")]
    ScalingTooSmall { m_n: u64 },

    #[error("{x} is outside extreme-value domain {domain}")]
    OutsideDomain { x: f64, domain: &'static str },

    #[error("unsupported scenery family: {0}")]
    UnsupportedFamily(String),

    #[error("level too high for horizon: no exceedances observed")]
    LevelTooHigh,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
