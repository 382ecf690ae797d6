//! Error type shared by all evaluators.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("decay rate must be positive, got {0}")]
    InvalidDecay(f64),
    #[error("contour passes through a singularity near {0}")]
    ContourThroughSingularity(Complex64),
    #[error("argument {z} lies at a pole (k={k}, l={l})")]
    AtPole { z: Complex64, k: usize, l: usize },
    #[error("argument {z} lies at a zero (k={k}, l={l})")]
    AtZero { z: Complex64, k: usize, l: usize },
    #[error("shift ladder needs {0} steps, above the configured limit")]
    LadderOverflow(usize),
    #[error("argument {0} is too close to a pole")]
    NearPole(Complex64),
    #[error("integral representation diverges: {0}")]
    IntegralDivergence(String),
    #[error("division by a near-zero quantity at {0}")]
    DivisionNearZero(Complex64),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("N = {0} is not supported")]
    UnsupportedN(usize),
    #[error("parameters outside the required window: {0}")]
    OutOfWindow(String),
    #[error("parameter interval mismatch: {0}")]
    IntervalMismatch(String),
    #[error("kernel is not unitary: {0}")]
    NonUnitaryKernel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("weight has a pole on the real axis: {0}")]
    RealPole(String),
    #[error("pole collision (double pole) at {0}")]
    DoublePole(Complex64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Rejects NaN or infinite values.
pub fn finite(z: Complex64, what: &str) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
