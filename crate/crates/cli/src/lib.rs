//! Experiment driver: offline family construction, the coarse-surrogate
//! accuracy and timing study, the selection agreement study and single-shot
//! estimation, all backed by an on-disk artifact store.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod plots;
pub mod store;

use thiserror::Error;

pub use cli::{run, Cli, Command};
pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: surrosel::Error,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn numerical(context: impl Into<String>, source: surrosel::Error) -> Self {
        Self::Numerical { context: context.into(), source }
    }

    /// 2 for configuration errors, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io(_) => 1,
        }
    }
}

/// Attaches a context string to core errors.
pub trait Context<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for surrosel::Result<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::numerical(context(), e))
    }
}
