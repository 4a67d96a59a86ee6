use thiserror::Error;

#[derive(Debug, Error)]
pub enum FdrsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} has no gradient")]
    NotSmooth(&'static str),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("constraints are infeasible (least-squares residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("not a fixed point: residual {residual:e} exceeds {tolerance:e}")]
    NotOptimal { residual: f64, tolerance: f64 },

    #[error("iteration diverged at k = {k} (norm {norm:e})")]
    Diverged { k: usize, norm: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FdrsError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FdrsError::DimensionMismatch { expected, got })
    }
}
