use thiserror::Error;

/// Errors raised by the decomposition library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Exact enumeration was requested beyond the supported group order.
    #[error("capacity exceeded: {what} requires n <= {limit}, got {requested}")]
    Capacity {
        what: &'static str,
        limit: usize,
        requested: usize,
    },

    /// A permutation moves coordinates outside the configuration window.
    #[error("permutation of degree {degree} does not act on a window of length {window}")]
    DegreeOverflow { degree: usize, window: usize },

    /// The measure gives zero mass to a point where a density was requested.
    #[error("zero mass at configuration {0}")]
    ZeroMass(String),

    /// An integral that was required to be finite diverges.
    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects live on different configuration windows.
    #[error("window mismatch: expected {expected}, got {actual}")]
    WindowMismatch { expected: usize, actual: usize },

    /// Too many probe points failed to show a convergent limit statistic.
    #[error("non-convergence: {failed} of {total} probe points failed (threshold {threshold})")]
    NonConvergence {
        failed: usize,
        total: usize,
        threshold: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
