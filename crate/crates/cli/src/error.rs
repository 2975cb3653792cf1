//! CLI error type with the documented process exit codes.

use hypercs_core::CoreError;
use thiserror::Error;

/// Exit code 2: bad or inconsistent arguments.
pub const EXIT_BAD_ARGS: i32 = 2;
/// Exit code 3: file or manifest format errors.
pub const EXIT_FORMAT: i32 = 3;
/// Exit code 4: dimension mismatch between pipeline stages.
pub const EXIT_DIMENSION: i32 = 4;
/// Exit code 5: solver non-convergence under --strict.
pub const EXIT_NON_CONVERGENCE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    BadArgs(String),

    #[error("{0}")]
    Format(String),

    #[error("{0}")]
    Dimension(String),

    #[error("{unconverged} of {total} bands did not converge (strict mode)")]
    NonConvergence { unconverged: usize, total: usize },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadArgs(_) => EXIT_BAD_ARGS,
            CliError::Format(_) => EXIT_FORMAT,
            CliError::Dimension(_) => EXIT_DIMENSION,
            CliError::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
            CliError::Core(e) => match e {
                CoreError::BadMagic { .. }
                | CoreError::Truncated { .. }
                | CoreError::DimensionOverflow
                | CoreError::NonFinite { .. }
                | CoreError::Io(_) => EXIT_FORMAT,
                CoreError::DimensionMismatch(_) => EXIT_DIMENSION,
                CoreError::InvalidArgument(_)
                | CoreError::NotPowerOfTwo(_)
                | CoreError::DegenerateBackground(_)
                | CoreError::DegenerateSignature => EXIT_BAD_ARGS,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
