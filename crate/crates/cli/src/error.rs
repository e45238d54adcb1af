use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] aura_core::Error),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: aura_core::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    /// 1 for internal failures, 2 for bad input or configuration.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) | CliError::Stage { source: e, .. } => {
                if e.is_internal() {
                    1
                } else {
                    2
                }
            }
            CliError::Output { .. } => 1,
        }
    }
}

/// Tags a core error with the pipeline stage that produced it.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for aura_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
