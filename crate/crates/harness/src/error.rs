use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] detinfo::Error),
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("experiment spec: {0}")]
    Spec(#[from] serde_json::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        HarnessError::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }

    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        use detinfo::Error as E;
        match self {
            HarnessError::Validation { .. } | HarnessError::Spec(_) => 1,
            HarnessError::Core(E::Validation { .. } | E::Domain(_) | E::Capacity(_)) => 1,
            HarnessError::Core(_)
            | HarnessError::Io { .. }
            | HarnessError::Csv(_)
            | HarnessError::ThreadPool(_) => 2,
        }
    }
}
