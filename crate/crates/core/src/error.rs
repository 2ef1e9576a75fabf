use thiserror::Error;

/// Errors returned by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel is not block-monotone at level {level}: {detail}")]
    NotBlockMonotone { level: usize, detail: String },

    #[error("reducible chain: {0}")]
    Reducible(String),

    #[error(
        "stationary distribution is not unique: states (level {}, phase {}) and (level {}, phase {}) lie in different closed classes",
        first.0, first.1, second.0, second.1
    )]
    AmbiguousStationary {
        first: (usize, usize),
        second: (usize, usize),
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("assumption could not be verified: {0}")]
    AssumptionUnverified(String),

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("tolerance unreachable (best residual {residual:e}): {detail}")]
    ToleranceUnreachable { residual: f64, detail: String },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code used by the command-line tool: 2 for bad input, 3 for an unreachable
    /// tolerance, 1 for everything that stops a computation from certifying its result.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Domain(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::ToleranceUnreachable { .. } => 3,
            _ => 1,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
