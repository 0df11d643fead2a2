use std::path::{Path, PathBuf};

use bnn_core::BnnError;

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] BnnError),
}

pub type CliResult<T> = Result<T, CliError>;

fn core_exit_code(e: &BnnError) -> i32 {
    match e {
        BnnError::Config(_) | BnnError::Argument(_) => 2,
        BnnError::InvalidData(_) | BnnError::Dimension(_) | BnnError::InsufficientDraws { .. } => 3,
        BnnError::Sweep { source, .. } | BnnError::Period { source, .. } => core_exit_code(source),
        _ => 4,
    }
}

impl CliError {
    /// 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Write { .. } => 2,
            CliError::Data(_) | CliError::Read { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Core(e) => core_exit_code(e),
        }
    }

    pub fn write(path: &Path, source: std::io::Error) -> Self {
        CliError::Write {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn read(path: &Path, source: std::io::Error) -> Self {
        CliError::Read {
            path: path.to_path_buf(),
            source,
        }
    }
}
