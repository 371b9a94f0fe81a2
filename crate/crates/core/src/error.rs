use thiserror::Error;

/// Errors raised by the aggregation pipeline and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid permutation size: {0}")]
    InvalidSize(usize),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("not a bijection on 1..={n}: {reason}")]
    NotBijection { n: usize, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("value {value} outside data range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("incomplete batch at timestamp {timestamp}: {reason}")]
    IncompleteBatch { timestamp: u64, reason: String },

    #[error("window query at t={t_q}, w={w}: missing estimate for timestamp {missing}")]
    MissingTimestamp { t_q: u64, w: u64, missing: u64 },

    #[error("data error at line {line}: {reason}")]
    Data { line: u64, reason: String },

    #[error("inconsistent inputs: {0}")]
    Mismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
