use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian: max deviation {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "eigensolver failed to converge within {iterations} iterations \
         (best residual {best_residual:.3e}, tolerance {tolerance:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
        tolerance: f64,
    },

    #[error("state is not an eigenvector of {operator} (residual {residual:.3e})")]
    NotAnEigenvector { operator: &'static str, residual: f64 },

    #[error("degenerate group could not be symmetry-resolved: {reason}")]
    UnresolvedDegeneracy { reason: String },

    #[error("density matrix has negative eigenvalue {value:.3e} beyond tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("capacitance matrix is singular (condition number {condition:.3e})")]
    SingularCapacitance { condition: f64 },

    #[error("Fock-state cutoff violated: population {population:.3e} at the highest level")]
    CutoffViolation { population: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("too many Monte Carlo sample failures: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
