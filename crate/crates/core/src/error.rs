use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("diagonal block at row {t} is singular or ill-conditioned")]
    SingularDiagonal { t: usize },

    #[error("set is empty")]
    EmptySet,

    #[error("support function is unbounded in the requested direction")]
    Unbounded,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invariant-set iteration did not converge within {k} iterations")]
    NotConverged { k: usize },

    #[error("maximal robust control invariant set is empty")]
    EmptyInvariantSet,

    #[error("closed-loop matrix is not contractive (spectral radius {rho:.6})")]
    NotContractive { rho: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("tightened {0} set is empty")]
    EmptyTightenedSet(&'static str),

    #[error("problem is infeasible")]
    Infeasible,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("solution violates {what} (worst value {value:e})")]
    InvariantViolated { what: &'static str, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
