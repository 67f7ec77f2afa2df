use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("rate mismatch: {0} vs {1}")]
    RateMismatch(f64, f64),

    #[error("reference signal has zero energy")]
    ZeroEnergy,

    #[error(
        "general kernel too expensive: ~{estimate:.3e} multiply-adds exceeds bound {bound:.3e}"
    )]
    CostBound { estimate: f64, bound: f64 },

    #[error("chain is not a perturbation of identity (alignment correlation {0:.3})")]
    NotNearIdentity(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
