use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error("pivot limit of {0} exceeded")]
    CycleLimitExceeded(usize),

    /// The learning window leaves no step to decide on, or is empty.
    #[error("degenerate learning window: n = {n}, eps = {eps}")]
    DegenerateWindow { n: usize, eps: f64 },

    #[error("stream exhausted after {0} arrivals")]
    StreamExhausted(usize),

    #[error("reward of column {0} is not positive")]
    NonpositiveReward(usize),

    #[error("every bid is zero")]
    AllZeroBids,

    #[error("bad generator spec: {0}")]
    BadSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 3 for bad data, 4 for solver or internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) | Error::CycleLimitExceeded(_) => 4,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
