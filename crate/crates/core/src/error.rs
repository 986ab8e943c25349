use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("numerical failure: {what} (condition estimate {condition:.3e})")]
    Numerical { what: String, condition: f64 },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("insufficient samples: got {got}, need more than {need:.3}")]
    InsufficientSamples { got: usize, need: f64 },

    #[error("sampling budget exhausted after {used} samples")]
    BudgetExhausted { used: u64 },

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
