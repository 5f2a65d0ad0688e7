use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("reference {path} was built for a different problem (hash {found}, expected {expected})")]
    ReferenceMismatch { path: PathBuf, expected: String, found: String },

    #[error("no reference at {path}; create it with `pmlmc reference`")]
    MissingReference { path: PathBuf },

    #[error(transparent)]
    Core(#[from] pmlmc_core::Error),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        use pmlmc_core::Error as E;
        match self {
            HarnessError::Core(
                E::SolverFailure { .. } | E::NotPositiveDefinite { .. } | E::NonPositiveCoefficient { .. },
            ) => 3,
            _ => 2,
        }
    }
}
