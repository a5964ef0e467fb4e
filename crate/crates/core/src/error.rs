use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlvcError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain does not fit the torus: axis {axis} needs at least {required} points, torus has {available}")]
    Sizing { axis: usize, required: usize, available: usize },

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: String, found: String },

    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { method: &'static str, iterations: usize, residual: f64 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("field format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NlvcError>;

impl NlvcError {
    /// Process exit status: 3 for solver or quadrature non-convergence, 2
    /// for everything that traces back to the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            NlvcError::NotConverged { .. } | NlvcError::QuadratureNotConverged { .. } | NlvcError::Numerical(_) => 3,
            _ => 2,
        }
    }
}
