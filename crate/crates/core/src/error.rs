use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular system: {reason} (condition number {condition_number:.3e})")]
    SingularSystem {
        reason: String,
        condition_number: f64,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("stratum {stratum} has {available} records but {requested} were requested")]
    Capacity {
        stratum: String,
        requested: usize,
        available: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfiguration(msg.into())
    }
}
