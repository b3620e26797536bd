//! Crate-wide error type.

use thiserror::Error;

/// Coarse classification used by callers that need to map failures onto
/// process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or request (missing records, bad parameters).
    Config,
    /// Input data failed validation (corrupt files, non-physical matrices).
    Validation,
    /// A numerical operation failed or produced non-finite values.
    Numeric,
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entries in numeric input: {0}")]
    NumericInput(String),

    #[error("matrix is not Hermitian within tolerance: defect {defect:.3e} > {tol:.3e}")]
    NonHermitian { defect: f64, tol: f64 },

    #[error("map is not completely positive: eigenvalue {eigenvalue:.3e} below floor -{floor:.3e}")]
    NonCompletelyPositive { eigenvalue: f64, floor: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unphysical parameters: {0}")]
    Unphysical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("routing contract violated: {0}")]
    Routing(String),

    #[error("optimization diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("decomposition failed to converge: {0}")]
    NoConvergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CoreError {
    /// Map the error onto an exit-code class.
    pub fn class(&self) -> ErrorClass {
        use CoreError::*;
        match self {
            Parameter(_) | Config(_) | Resource(_) | Unphysical(_) | Routing(_) => {
                ErrorClass::Config
            }
            Parse(_) | Schema(_) | Validation(_) | NonHermitian { .. }
            | NonCompletelyPositive { .. } | Shape(_) | Io(_) => ErrorClass::Validation,
            NumericInput(_) | Diverged { .. } | NoConvergence(_) => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
