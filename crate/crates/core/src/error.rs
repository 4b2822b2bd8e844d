use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("step {step} is outside the transition table (length {len})")]
    Horizon { step: usize, len: usize },

    #[error("state diverged (non-finite value) at step {step}")]
    Divergence { step: usize },

    #[error("numeric failure at step {step}: {what}")]
    Numeric { step: usize, what: String },

    #[error("information matrix is singular; state not yet observable")]
    NotObservable,

    #[error("sensor network is empty")]
    EmptyNetwork,

    #[error("selection error: {0}")]
    Selection(String),

    #[error("ordering precondition violated: {0}")]
    Ordering(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 1 validation, 2 I/O, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Csv(_) => 2,
            Error::Divergence { .. } | Error::Numeric { .. } | Error::NotObservable => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
