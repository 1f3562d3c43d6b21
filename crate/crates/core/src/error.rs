use thiserror::Error;

pub type Result<T, E = HeatError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HeatError {
    #[error("data violate the Neumann compatibility condition: residual {residual:e} exceeds {tolerance:e}")]
    CompatibilityViolation { residual: f64, tolerance: f64 },

    #[error(
        "linear solver did not converge: {iterations} iterations, relative residual {residual:e}"
    )]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e}); try a smaller time step")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("identifiable temperature interval is empty: {0}")]
    EmptyIdentifiableInterval(String),

    #[error("no feasible experiment design: {0}")]
    DesignInfeasible(String),

    #[error("equilibrium not reached within {steps} steps (last |u_t| = {ut_norm:e})")]
    EquilibriumNotReached { steps: usize, ut_norm: f64 },

    #[error("curve point ({x}, {y}) does not lie on the grid boundary")]
    CurveOffBoundary { x: f64, y: f64 },

    #[error("field size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
}

impl HeatError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HeatError::InvalidInput(msg.into())
    }
}
