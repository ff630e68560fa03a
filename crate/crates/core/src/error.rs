use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("top eigenvalue is degenerate (gap {gap:e})")]
    DegenerateTop { gap: f64 },

    #[error("no violation: best achievable value {best} does not exceed {bound}")]
    NoViolation { best: f64, bound: f64 },

    #[error("rounds do not cross on (0, 1]: {reason}")]
    NoCrossing { reason: String },

    #[error("state is not pure")]
    NotPure,
}
