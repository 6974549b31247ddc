use thiserror::Error;

/// Errors raised by the numerical core and the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("non-finite exponent {0}")]
    NonFiniteExponent(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("row {row} of weight matrix sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("empty neighbor set")]
    EmptyNeighborSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("NaN detected at step {step}: {detail}")]
    NaN { step: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, SimError>;
