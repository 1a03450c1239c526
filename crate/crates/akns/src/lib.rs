//! Files, reference PDE integrators and the command-line pipeline around
//! [`akns_core`].

use std::path::{Path, PathBuf};

pub use akns_core;

pub mod cli;
pub mod io;
pub mod pde_oracle;

/// Errors of the std layer.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<AppError>,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] akns_core::Error),
    #[error(transparent)]
    Oracle(#[from] pde_oracle::OracleError),
    #[error("{0}")]
    Usage(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn in_file(self, path: &Path) -> Self {
        AppError::InFile { path: path.to_path_buf(), source: Box::new(self) }
    }

    /// Malformed input (exit 2) as opposed to a numerical failure (exit 3).
    pub fn is_validation(&self) -> bool {
        match self {
            AppError::Core(e) => e.is_validation(),
            AppError::Oracle(e) => e.is_validation(),
            AppError::InFile { source, .. } => source.is_validation(),
            _ => true,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            3
        }
    }
}
