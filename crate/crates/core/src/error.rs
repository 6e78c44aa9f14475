use thiserror::Error;

/// Errors raised across the detection toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An antenna SNR sits at or below the Term-A bound `rho / (1 - rho)`.
    #[error("constraint violation: antenna {index} has SNR {gamma} <= bound {bound}")]
    ConstraintViolation { index: usize, gamma: f64, bound: f64 },

    #[error("no usable antenna: every SNR is at or below rho/(1-rho) = {bound}")]
    NoUsableAntenna { bound: f64 },

    #[error("weight ascent did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        trace: Vec<Vec<f64>>,
    },

    #[error("value {value} outside supported range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) => Error::Parse { line: pos.line() as usize, message: e.to_string() },
            None => Error::Io(e.to_string()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
