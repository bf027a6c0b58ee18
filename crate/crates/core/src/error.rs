use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EwsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EwsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("covariance matrix is singular even after ridge regularization")]
    SingularCovariance,

    #[error("kernel matrix is ill-conditioned: Cholesky failed with jitter up to {jitter:e}")]
    IllConditionedKernel { jitter: f64 },

    #[error("integration blew up at t = {time}")]
    IntegrationFailure { time: f64 },

    #[error("no viable community after {attempts} parameter draws")]
    ViabilityFailure { attempts: usize },

    #[error("surrogate replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<EwsError>,
    },

    #[error("window ending at t = {end_time}: {source}")]
    Window {
        end_time: i64,
        #[source]
        source: Box<EwsError>,
    },

    #[error("posterior did not converge (max r_hat = {max_r_hat:.3}, {n_divergent} divergent transitions)")]
    NotConverged { max_r_hat: f64, n_divergent: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EwsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        EwsError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EwsError::Io {
            path: path.into(),
            source,
        }
    }
}
