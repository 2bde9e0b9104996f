//! Batch front end: `mgdeform <command> --config <file.toml> [--out <dir>]`.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 solver failure
//! (including non-finite results), 3 a `verify` check failed.

pub mod config;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

use config::{Command, RunConfig};
use report::{OutputDir, Status};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<mgdeform_core::Error> for CliError {
    fn from(e: mgdeform_core::Error) -> Self {
        match e {
            mgdeform_core::Error::Invalid(m) => CliError::Validation(m),
            mgdeform_core::Error::Io(e) => CliError::Io(e),
            other => CliError::Solver(other.to_string()),
        }
    }
}

pub const DEFAULT_OUT: &str = "out";

/// Loads the config, resolves the output directory (flag, then config, then
/// `out`), and runs the command under the directory lock.
pub fn run(command: Command, config: &Path, out: Option<&Path>) -> Result<Status, CliError> {
    let cfg = RunConfig::load(config)?;
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Validation(format!(
                "config is for '{}' but '{}' was requested",
                c.name(),
                command.name()
            )));
        }
    }
    let dir: PathBuf = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
    let out_dir = OutputDir::acquire(&dir)?;
    run::execute(command, &cfg, &out_dir)
}
