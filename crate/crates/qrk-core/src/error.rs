use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {0} has norm below 1e-300 and cannot be normalized")]
    ZeroRow(usize),
    #[error("index {index} out of range for {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("cannot take a quantile of an empty sample")]
    EmptySample,
    #[error("quantile index floor(q*{len}) = 0 for q = {q}")]
    QuantileIndexZero { q: f64, len: usize },
    #[error("no residuals passed the threshold")]
    EmptyAcceptedSet,
    #[error("cannot sample {k} of {m} without replacement")]
    SampleTooLarge { k: usize, m: usize },
    #[error("quantile condition violated: alpha*(1-q) <= beta")]
    QuantileConditionViolated,
    #[error("sampling condition violated: alpha*q <= beta")]
    SamplingConditionViolated,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("trace carries no recorded sigma values")]
    EmptyTrace,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed system file: {0}")]
    MalformedFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
