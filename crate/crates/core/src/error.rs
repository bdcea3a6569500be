use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A stationarity / positivity / boundedness condition does not hold.
    #[error("condition failed: {condition} (lhs = {lhs}, rhs = {rhs})")]
    ConditionFailed { condition: &'static str, lhs: f64, rhs: f64 },

    #[error("{what} = {value} is not a multiple of the grid step {step}")]
    OffGrid { what: &'static str, value: f64, step: f64 },

    #[error("history does not cover t = {t} (earliest available {earliest})")]
    InsufficientHistory { t: f64, earliest: f64 },

    #[error("contour too coarse: argument increment {increment} rad exceeds pi/2 near z = {re}{im:+}i")]
    ContourTooCoarse { increment: f64, re: f64, im: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
