use std::path::PathBuf;

/// Errors raised by the model, sampler, and data layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix could not be factorized after jitter escalation (last jitter {jitter:e})")]
    FactorizationFailure { jitter: f64 },

    #[error("Pólya-Gamma sampler stalled after {proposals} proposals (c = {c})")]
    SamplerStall { c: f64, proposals: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("AUC needs both classes present ({positives} positives, {negatives} negatives)")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    #[error("archive version error: {0}")]
    Version(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sweep {sweep}: {source}")]
    AtSweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery (factorization, PG stalls),
    /// including those wrapped with a sweep index.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::FactorizationFailure { .. } | Error::SamplerStall { .. } => true,
            Error::AtSweep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
