//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry at position {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("matrix is singular to working precision (pivot {pivot:e} at step {step})")]
    Singular { step: usize, pivot: f64 },

    #[error("A-block singular: {0}")]
    SingularA(Box<Error>),

    #[error("Schur complement singular: {0}")]
    SingularSchur(Box<Error>),

    #[error("size cap exceeded: {entries} entries requested, cap is {cap}")]
    SizeCap { entries: usize, cap: usize },

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate:e})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("matrix is not in the {kind} subspace: worst residual {residual:e} at ({row}, {col})")]
    NotInSubspace {
        kind: String,
        row: usize,
        col: usize,
        residual: f64,
    },

    #[error("invalid structure basis: {0}")]
    InvalidBasis(String),

    #[error("degenerate solution: {0} is identically zero")]
    DegenerateSolution(String),

    #[error("wrong case: {0}")]
    WrongCase(String),

    #[error("weight matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("perturbed system is singular for seed {seed}; retry with a different seed")]
    PerturbedSingular { seed: u64 },

    #[error("derivative check failed: fitted slope {slope:.3} outside [{lo}, {hi}]")]
    DerivativeCheck { slope: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non-finite",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Singular { .. } => "singular",
            Error::SingularA(_) => "singular-a",
            Error::SingularSchur(_) => "singular-schur",
            Error::SizeCap { .. } => "size-cap",
            Error::NoConvergence { .. } => "no-convergence",
            Error::NotInSubspace { .. } => "structure-membership",
            Error::InvalidBasis(_) => "invalid-basis",
            Error::DegenerateSolution(_) => "degenerate-solution",
            Error::WrongCase(_) => "wrong-case",
            Error::NotPositiveDefinite(_) => "not-spd",
            Error::PerturbedSingular { .. } => "perturbed-singular",
            Error::DerivativeCheck { .. } => "derivative-check",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }

    pub(crate) fn dims(context: &str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            context: context.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
