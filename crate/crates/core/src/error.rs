use thiserror::Error;

/// Errors raised by the channel, allocation, protocol and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("SVD of a {rows}x{cols} matrix did not converge (residual {residual:.3e})")]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        residual: f64,
    },
    #[error("expected an even number of subchannels, got {0}")]
    OddChannelCount(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("power budget must be positive, got {0}")]
    NonPositiveBudget(f64),
    #[error("exhaustive pairing search supports at most 8 subchannels, got {0}")]
    OracleTooLarge(usize),
    #[error("could not bracket the Lagrange multiplier: {0}")]
    BracketFailure(String),
    #[error("file holds {got} bits but the session needs {needed}")]
    FileTooShort { needed: usize, got: usize },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("not enough curve points: {0}")]
    InsufficientPoints(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
