use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input not found: {}", .0.display())]
    InputNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{module}: {message}")]
    Module { module: &'static str, message: String },
}

/// Machine-readable form of a failure, embedded in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub module: Option<&'static str>,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::InputNotFound(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Module { .. } => 5,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (kind, module) = match self {
            CliError::Config(_) => ("config_error", None),
            CliError::InputNotFound(_) => ("input_not_found", None),
            CliError::Io { .. } => ("io_error", None),
            CliError::Module { module, .. } => ("module_error", Some(*module)),
        };
        ErrorReport {
            kind,
            module,
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Tags a downstream error with the module it came from.
pub fn in_module<E: Display>(module: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Module {
        module,
        message: e.to_string(),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
