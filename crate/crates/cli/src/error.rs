use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] decorr_core::Error),
}

impl CliError {
    /// 2 for usage errors, 3 for unreadable or malformed data, 4 for
    /// numeric divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use decorr_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Read { .. } => 3,
            CliError::Write { .. } => 1,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Shape { .. } => 2,
                E::Graph(_) | E::Split(_) => 3,
                E::Divergence { .. } => 4,
                _ => 1,
            },
        }
    }

    pub(crate) fn read(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Read { path, source }
    }

    pub(crate) fn write(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Write { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
