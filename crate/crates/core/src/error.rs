use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel is infinite at coincident points; use epsilon > 0")]
    InfiniteKernel,

    #[error("matrix is not positive definite after maximum jitter (smallest pivot {smallest_pivot:e})")]
    NotPositiveDefinite { smallest_pivot: f64 },

    #[error("energy radicand {radicand:e} is negative beyond round-off")]
    NumericalConsistency { radicand: f64 },

    #[error(
        "solver did not converge after {iterations} iterations \
         (stationarity {stationarity:e}, dual feasibility {dual_feasibility:e})"
    )]
    NonConvergence {
        iterations: usize,
        stationarity: f64,
        dual_feasibility: f64,
        best: Vec<f64>,
    },

    #[error("active set revisited after {iterations} iterations (cycling)")]
    Cycling { iterations: usize },

    #[error("nesting violation: {0}")]
    NestingViolation(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NumericalConsistency { .. }
                | Error::NonConvergence { .. }
                | Error::Cycling { .. }
        )
    }
}
