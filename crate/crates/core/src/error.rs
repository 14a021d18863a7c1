use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular flow system: {0}")]
    SingularSystem(String),

    #[error("flow solve did not converge after {iterations} iterations (max head change {max_change:e} m)")]
    NotConverged { iterations: usize, max_change: f64 },

    #[error("particle tracking: {0}")]
    Tracking(String),

    #[error("all calibration candidates are infeasible")]
    AllInfeasible,

    #[error("hessian is not positive definite: eigenvalue {eigenvalue:e} (largest {largest:e}) along parameter direction {direction:?}")]
    IndefiniteHessian {
        eigenvalue: f64,
        largest: f64,
        direction: [f64; 4],
    },

    #[error("posterior sampling acceptance below 1/{max_rejects} after {rejected} rejections; inspect the posterior covariance")]
    LowAcceptance { max_rejects: usize, rejected: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
