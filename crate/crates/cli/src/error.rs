use std::io;
use std::path::{Path, PathBuf};

use splatrig_core::pipeline::PipelineError;
use thiserror::Error;

/// Process exit codes; stable across releases.
pub mod exit {
    pub const IO: i32 = 1;
    pub const MISSING_INPUT: i32 = 2;
    pub const FORMAT: i32 = 3;
    pub const USAGE: i32 = 4;
    pub const FILTER: i32 = 10;
    pub const FIT: i32 = 11;
    pub const BIND: i32 = 12;
    pub const RUNTIME: i32 = 13;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: no such file", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Missing(_) => exit::MISSING_INPUT,
            CliError::Io { .. } => exit::IO,
            CliError::Format { .. } => exit::FORMAT,
            CliError::Usage(_) => exit::USAGE,
            CliError::Pipeline(e) => match e {
                PipelineError::Filter(_) => exit::FILTER,
                PipelineError::Fit(_) => exit::FIT,
                PipelineError::Bind(_) | PipelineError::Bundle(_) => exit::BIND,
            },
            CliError::Runtime(_) => exit::RUNTIME,
        }
    }

    pub fn format(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Format { path: path.to_path_buf(), message: err.to_string() }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Extra hint printed after the error message.
    pub fn guidance(&self) -> Option<&'static str> {
        use splatrig_core::fit::FitError;
        match self {
            CliError::Pipeline(PipelineError::Fit(FitError::AmbiguousOrientation { .. })) => {
                Some("hint: rerun with --manual-yaw <degrees> giving the direction the subject faces")
            }
            CliError::Pipeline(PipelineError::Fit(FitError::PoorFit { .. })) => {
                Some("hint: check --target-height and the filter flags, or pass --accept-poor-fit")
            }
            _ => None,
        }
    }
}
