use thiserror::Error;

/// Errors raised by the calculus toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected H^{expected}, got H^{got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("dilation factor must be positive, got {0}")]
    InvalidDilation(f64),

    #[error("direction is not a unit horizontal vector (omega = {0})")]
    NonUnitDirection(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("construction undefined: {0}")]
    Undefined(&'static str),

    #[error("difference quotients diverge (last two levels {0} -> {1})")]
    Diverging(f64, f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no admissible grid point found (best candidate index {best:?})")]
    SearchResolution { best: Option<usize> },

    #[error("cover level {requested} exceeds constructed depth {depth}")]
    LevelOutOfRange { requested: usize, depth: usize },

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
