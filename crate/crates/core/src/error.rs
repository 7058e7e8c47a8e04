use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FouError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("matrix is not positive definite (pivot {index}, value {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("circulant embedding has a negative eigenvalue {min_eigenvalue:e}")]
    NegativeEmbedding { min_eigenvalue: f64 },

    #[error(
        "spectral tail bound {bound:e} exceeds tolerance {tolerance:e} at lag {lag}; increase the cutoff frequency"
    )]
    TailBound { lag: f64, bound: f64, tolerance: f64 },

    #[error("optimizer did not converge from any start; best incumbent {best_lambda:?} (contrast {best_value})")]
    NoConvergence { best_lambda: Vec<f64>, best_value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl FouError {
    /// True for failures of a numerical routine, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FouError::Quadrature(_)
                | FouError::NotPositiveDefinite { .. }
                | FouError::NegativeEmbedding { .. }
                | FouError::TailBound { .. }
                | FouError::NoConvergence { .. }
                | FouError::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, FouError>;
