use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid mode index: {0}")]
    Index(String),

    /// A matrix failed one of the physicality checks.
    #[error("numerical conditioning: invariant `{invariant}` violated ({detail})")]
    Conditioning {
        invariant: &'static str,
        detail: String,
    },

    /// A principal minor that must be positive was not.
    #[error("non-positive determinant for mode subset {subset:?} (pivot {pivot:e})")]
    NonPositiveMinor { subset: Vec<usize>, pivot: f64 },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid instance: invariant `{invariant}` violated ({detail})")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("insufficient samples: {0}")]
    Shortfall(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
