use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the region where the model or formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel evaluated to a non-finite value at (t={t}, s={s})")]
    NonFinite { t: f64, s: f64 },

    #[error("Cholesky decomposition failed after jitter ramp (last jitter {jitter:e})")]
    Decomposition { jitter: f64 },

    #[error("circulant embedding is not nonnegative definite: eigenvalue {min:e} vs max {max:e}")]
    Embedding { min: f64, max: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("step is too stiff for the drift update: k*dt = {0} >= 10")]
    Stiff(f64),

    /// Sample variance of the path is not positive, so the moment estimator
    /// of the mean-reversion speed cannot be inverted.
    #[error("non-positive sample variance {0:e}")]
    NonPositiveVariance(f64),

    #[error("degenerate least-squares design: {0}")]
    DegenerateDesign(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Integration { achieved: f64, requested: f64 },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("summary failed: {0}")]
    Summary(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}
