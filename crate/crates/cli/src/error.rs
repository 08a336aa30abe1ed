use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Input files that parse but do not fit together.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] sparsect::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 1 usage, 2 input format, 3 numerical or degenerate input.
    pub fn exit_code(&self) -> i32 {
        use sparsect::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidDimensions(_) | E::OutOfRange(_) | E::InvalidGeometry(_) | E::InvalidConfig(_) => 1,
                E::Format(_) | E::DimensionMismatch(_) => 2,
                E::NonFinite(_) | E::Degenerate(_) | E::EstimationFailed { .. } => 3,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
