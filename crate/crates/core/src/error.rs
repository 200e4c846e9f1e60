use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eig:e}, tolerance {tol:e})")]
    NotPsd { min_eig: f64, tol: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:e}, tolerance {tol:e})")]
    NotPd { min_eig: f64, tol: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("innovation covariance is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("Riccati iteration did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("closed-loop spectral radius {0} is not below 1: model is not stabilizable")]
    NotStabilizable(f64),

    #[error("N+1 > d required (ensemble size N={n}, state dimension d={d})")]
    EnsembleTooSmall { n: usize, d: usize },

    #[error("ensemble covariance lost positive definiteness (smallest eigenvalue {min_eig:e}); N is too small for this model")]
    Collapse { min_eig: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
