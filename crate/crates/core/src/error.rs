//! Shared error type for all pipeline stages.

use thiserror::Error;

/// Errors produced by cube I/O, transforms, sampling, reconstruction, and
/// detection.
///
/// Solver non-convergence is deliberately *not* an error: the solver always
/// returns its best iterate together with a [`crate::solver::SolverReport`]
/// whose `converged` flag records the outcome.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Two operands disagree on a dimension (vector lengths, cube shapes,
    /// operator sizes, ...).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violates a precondition (rate out of range, empty frame
    /// set, zero-sized window, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A transform or operator requires a power-of-two length.
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    /// A binary file does not start with the expected magic bytes.
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic {
        expected: [u8; 4],
        found: [u8; 4],
    },

    /// A binary payload is shorter or longer than its header promises.
    #[error("truncated payload: expected {expected} bytes after header, found {found}")]
    Truncated { expected: u64, found: u64 },

    /// Header dimensions multiply past addressable size.
    #[error("dimension overflow: header dimensions exceed addressable size")]
    DimensionOverflow,

    /// A loaded value is NaN or infinite.
    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    /// Background data cannot support a usable covariance model.
    #[error("degenerate background: {0}")]
    DegenerateBackground(String),

    /// The target signature vanishes (before or after mean centering).
    #[error("degenerate signature: zero vector after centering")]
    DegenerateSignature,

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
