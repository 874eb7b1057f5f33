use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A metric that needs both outcome classes was given only one.
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("solver did not converge after {iterations} iterations (|grad|_inf = {grad_inf_norm:e})")]
    NotConverged { iterations: usize, grad_inf_norm: f64 },

    #[error("{path}: line {line}, field `{field}`: {message}")]
    Parse {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
