//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by matrix construction, decomposition, simulation and
/// estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix claimed to be symmetric has a mismatched entry pair.
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {deviation:e} exceeds tolerance {tolerance:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
        tolerance: f64,
    },

    /// A non-finite value (NaN or infinity) was encountered in an input.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A Cholesky pivot failed; the matrix is not positive-definite.
    #[error("matrix is not positive-definite")]
    NotPositiveDefinite,

    /// The iterative eigensolver did not converge within its iteration cap.
    #[error("symmetric eigendecomposition failed to converge")]
    EigenConvergence,

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A configuration value violates its documented constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A scalar argument is outside its admissible range.
    #[error("{what} = {value} is out of range: {constraint}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// A register index is outside the register.
    #[error("register index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    /// A composite-system simulation would exceed the amplitude budget.
    #[error("statevector of {required} amplitudes exceeds budget of {budget}")]
    BudgetExceeded { required: usize, budget: usize },

    /// An input state does not have unit norm.
    #[error("input state norm {norm} is not 1 within tolerance")]
    NotNormalized { norm: f64 },

    /// An operation that samples from a vector's coefficients received the
    /// zero vector.
    #[error("zero vector has no sampling distribution")]
    ZeroVector,

    /// A polynomial approximation interval is empty or non-positive.
    #[error("invalid interval [{lo}, {hi}]: {reason}")]
    InvalidInterval {
        lo: f64,
        hi: f64,
        reason: &'static str,
    },

    /// The truncated power series is diverging; the spectrum lies outside
    /// the convergence region.
    #[error("power-series iteration diverged: spectrum outside (0, 2*lambda_up)")]
    SeriesDiverged,

    /// A hyperparameter grid contained no candidate values.
    #[error("empty hyperparameter grid")]
    EmptyGrid,

    /// Too few Monte Carlo samples requested.
    #[error("sample count {0} is below the minimum of 2")]
    TooFewSamples(usize),

    /// File I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A text fixture (matrix file or dataset CSV) is malformed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
