use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A structural hypothesis on the measure or the data is violated.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// The signed operator is not coercive on the grid (smallest eigenvalue <= 0).
    #[error("operator is not coercive (coercivity margin {margin:.6e}); eigenvalue and solution are not interpretable")]
    NotCoercive { margin: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
