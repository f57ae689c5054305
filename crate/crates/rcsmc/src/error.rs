use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is not symmetric positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("degenerate weights (all -inf){}", t.map(|t| format!(" at time step {t}")).unwrap_or_default())]
    DegenerateWeights { t: Option<usize> },

    #[error("non-finite value encountered ({context})")]
    NonFinite { context: &'static str },

    #[error("empty replica set at time step {t}")]
    EmptyReplicaSet { t: usize },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("infinite variance: requires sigma0_sq > 2 * sigma1_sq")]
    InfiniteVariance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Exit-code class used by the CLI: 1 usage, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::InvalidConfig(_) => 1,
            Error::Io(_) | Error::MalformedFile { .. } => 3,
            _ => 2,
        }
    }
}
