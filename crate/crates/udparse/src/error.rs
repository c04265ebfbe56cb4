use std::path::PathBuf;

use thiserror::Error;

/// Errors of the command-line layer. Each maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: udparse_core::Error,
    },
    #[error("model file {path}: {source}")]
    ModelFile {
        path: PathBuf,
        #[source]
        source: crate::model_file::ModelFileError,
    },
    #[error("alignment mismatch: {0}")]
    Alignment(String),
    #[error("{0} gradient check(s) exceeded the tolerance")]
    GradCheck(usize),
    #[error(transparent)]
    Core(udparse_core::Error),
}

impl From<udparse_core::Error> for CliError {
    fn from(e: udparse_core::Error) -> Self {
        match e {
            udparse_core::Error::Alignment(m) => CliError::Alignment(m),
            e => CliError::Core(e),
        }
    }
}

impl CliError {
    /// 2 for unusable inputs, 3 for misaligned treebanks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Config(_) | CliError::Input { .. } | CliError::ModelFile { .. } => 2,
            CliError::Alignment(_) => 3,
            CliError::GradCheck(_) | CliError::Core(_) => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
