use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("product of degree {degree} needs pad >= {required}, grid has pad {pad}")]
    InsufficientPadding { degree: usize, required: usize, pad: usize },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("wick power ({0},{1}) is not part of this family")]
    MissingWickPower(usize, usize),

    #[error("blow-up at t = {t}: L2 norm {norm}")]
    BlowUp { t: f64, norm: f64 },

    #[error("exact oracle too large: degree {degree} at cutoff {cutoff}")]
    OracleTooLarge { degree: usize, cutoff: usize },

    #[error("fixed-point iteration failed on horizon {horizon} after {iterations} iterations (last change {last_change:e})")]
    HorizonTooLarge { horizon: f64, iterations: usize, last_change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
