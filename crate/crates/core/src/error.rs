use thiserror::Error;

use crate::hermitian::LinalgError;
use crate::symbols::SymbolError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("quadrature under-resolved: doubling changed an entry by {max_change:e} (n_phi = {n_phi}, n_t = {n_t})")]
    QuadratureUnderResolved {
        max_change: f64,
        n_phi: usize,
        n_t: usize,
    },
    #[error("degree overflow: {0}")]
    DegreeOverflow(String),
    #[error("insufficient points: {got} (need at least {need})")]
    InsufficientPoints { got: usize, need: usize },
    #[error("non-positive value {value:e} at index {index} cannot be log-fitted")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("eigenvalue index {index} out of range (dimension {dim})")]
    EigSelection { index: usize, dim: usize },
    #[error("unsharpness violated: upper proxy {upper:e} < lower proxy {lower:e}")]
    UnsharpnessViolated { upper: f64, lower: f64 },
    #[error("fuzziness exponent p = {p} is below the quantum length scale (p must be ≤ 1/2)")]
    FuzzinessBelowQuantumScale { p: f64 },
    #[error("radius {r} is below the quantum scale κ·ħ^(1/2) = {min}")]
    RadiusBelowQuantumScale { r: f64, min: f64 },
    #[error("the pair commutes numerically (‖{{f,g}}‖ = {bracket_norm:e})")]
    CommutingPair { bracket_norm: f64 },
    #[error("degenerate symbol: {0}")]
    DegenerateSymbol(String),
    #[error("degenerate bracket: {0}")]
    DegenerateBracket(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Failures of the numerical machinery itself, as opposed to bad input.
    pub fn is_numerical_infrastructure(&self) -> bool {
        matches!(
            self,
            Error::Linalg(LinalgError::NoConvergence { .. })
                | Error::Linalg(LinalgError::NonFinite { .. })
                | Error::QuadratureUnderResolved { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
