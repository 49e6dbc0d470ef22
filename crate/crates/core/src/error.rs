use std::path::PathBuf;

/// Errors produced by the penetration-bias toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Point evaluation of a profile at an integrable singularity.
    #[error("profile is singular at depth {depth} (shape {shape} < 1)")]
    Singularity { depth: f64, shape: f64 },

    #[error("quadrature did not reach tolerance {requested:e} (estimated error {achieved:e}) within {subdivisions} subdivisions")]
    Quadrature {
        requested: f64,
        achieved: f64,
        subdivisions: usize,
    },

    #[error("profile is not integrable: tail mass is not decreasing beyond depth {depth} m")]
    NonIntegrable { depth: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operation not supported for model kind {0}")]
    Kind(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch} ({detail})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: field `{field}` violates its invariant ({message})")]
    Invariant {
        path: PathBuf,
        line: u64,
        field: &'static str,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported model file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

/// Fails with a [`Error::Domain`] unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}
