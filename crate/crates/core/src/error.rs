use std::fmt;
use std::path::PathBuf;

/// Which amplitude pair failed the normalization check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeSite {
    /// The central spin's `(a, b)`.
    Central,
    /// Environment spin `i` (zero-based) and its `(alpha, beta)`.
    Environment(usize),
}

impl fmt::Display for AmplitudeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmplitudeSite::Central => write!(f, "central spin (a, b)"),
            AmplitudeSite::Environment(i) => write!(f, "environment spin {i} (alpha, beta)"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{site} is not normalized: |x|^2 + |y|^2 - 1 = {residual:e}")]
    Normalization { site: AmplitudeSite, residual: f64 },

    #[error("the environment must contain at least one spin")]
    EmptyEnvironment,

    #[error("non-finite or invalid value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} terms")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error(
        "N = {n} exceeds the enumeration cap of {cap} spins \
         (would need about {bytes} bytes); reduce N or raise the cap"
    )]
    CapExceeded { n: usize, cap: usize, bytes: u128 },

    #[error("integer overflow evaluating {0}")]
    Overflow(String),

    #[error("dimension mismatch: expected {expected} environment parts, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate point set: {0}")]
    DegenerateSet(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
