use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{which} Gram matrix is not symmetric positive definite (min eig {min_eig:e}, max eig {max_eig:e})")]
    NotSpd {
        which: &'static str,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("numerically singular system at t = {t}, lambda = {lambda_re}{lambda_im:+}i (condition {cond:e})")]
    Singular {
        t: f64,
        lambda_re: f64,
        lambda_im: f64,
        cond: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contour quadrature residual {residual:e} exceeds tolerance")]
    Quadrature { residual: f64 },

    #[error("Neumann iteration is not contracting (distances {history:?}); refine the time grid")]
    NonContraction { history: Vec<f64> },

    #[error("no convergence after {iterations} iterations (residuals {history:?})")]
    MaxIter { iterations: usize, history: Vec<f64> },

    #[error("blow-up: Y-norm {norm:e} at t = {t}")]
    BlowUp { t: f64, norm: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("malformed process dump: {0}")]
    Dump(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
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
