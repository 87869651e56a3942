use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

/// Solver state captured when an iterative routine gives up.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("column {column} is linearly dependent on earlier columns (residual norm {residual:.3e})")]
    RankDeficient { column: usize, residual: f64 },

    #[error("columns are not orthonormal (max Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("zero-variance column {column} in {block}")]
    ZeroVariance { block: &'static str, column: usize },

    #[error("{solver} did not converge after {} iterations (kkt residual {:.3e})", .diagnostics.iterations, .diagnostics.kkt_residual)]
    Convergence {
        solver: &'static str,
        diagnostics: SolverDiagnostics,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Free-form numeric diagnostics attached to estimates (ordered for stable serialisation).
pub type Diagnostics = BTreeMap<String, f64>;
