use thiserror::Error;

/// Errors raised by the q-calculus primitives, assemblies, solvers and verifiers.
///
/// Numeric payloads are carried as `f64` so the error type does not depend on
/// the scalar parameter of the routine that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("q must lie in (0,1), got {0}")]
    InvalidQ(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value while evaluating {what} at {at}")]
    Evaluation { what: &'static str, at: f64 },

    #[error("series diverges: |z| = {z} is outside the radius {radius}; use product mode")]
    Radius { z: f64, radius: f64 },

    #[error("pole at lattice point t = {t}: operator eigenvalue near {eigenvalue} makes the implicit step singular")]
    Pole { t: f64, eigenvalue: f64 },

    #[error("lattice alignment: {0}")]
    LatticeAlignment(String),

    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("coverage error: stored solution has no value at q*t for t = {0}")]
    Coverage(f64),

    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),

    #[error("step size error: {0}")]
    StepSize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

#[inline]
pub(crate) fn f64_of<T: num_traits::ToPrimitive>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
