use thiserror::Error;

/// Errors produced by construction and validation of algebraic data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid algebra descriptor: {0}")]
    InvalidAlgebra(String),

    #[error("invalid module: {0}")]
    InvalidModule(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),

    #[error("complex property violated at k = {k}: ||t_{{k+1}} t_k|| = {norm:.3e} exceeds tolerance {tol:.3e}")]
    ComplexProperty { k: usize, norm: f64, tol: f64 },

    #[error("operator is not Hermitian: relative residual {residual:.3e}")]
    NotHermitian { residual: f64 },

    #[error("Gram metric is not positive definite: smallest eigenvalue {min_eig:.3e}")]
    GramNotPositive { min_eig: f64 },

    #[error("numerically singular: {0}")]
    Singular(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("exactness fails at k = {k}: {reason}")]
    NotExact { k: usize, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
