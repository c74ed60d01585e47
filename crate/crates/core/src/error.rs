use thiserror::Error;

use crate::hj::SignMode;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {location:?}")]
    NonFinite { location: Vec<f64>, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL violation: dt = {dt:e} exceeds the monotone limit; required dt <= {required:e}")]
    Cfl { dt: f64, required: f64 },

    #[error("velocity value {value:e} at {location:?} violates sign mode {mode:?}")]
    SignViolation {
        mode: SignMode,
        value: f64,
        location: Vec<f64>,
    },

    #[error("velocity declared nonnegative but assembled value is {value:e} at {location:?}, t = {t}")]
    H5Violation {
        t: f64,
        value: f64,
        location: Vec<f64>,
    },

    #[error("gradient margin assumption violated: measured eta0 = {0:e}")]
    H3Violation(f64),

    #[error("support overflow: {0}")]
    SupportOverflow(String),

    #[error("front containment: {0}")]
    Containment(String),

    #[error(
        "fixed point did not converge on slab {slab} after {iterations} iterations; distance history {distances:?}"
    )]
    NoConvergence {
        slab: usize,
        iterations: usize,
        distances: Vec<f64>,
    },

    #[error("outside validity window: {0}")]
    ValidityWindow(String),

    #[error("field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
