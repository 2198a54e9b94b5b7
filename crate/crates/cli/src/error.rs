use std::path::PathBuf;

use genflow_core::Error as CoreError;
use thiserror::Error;

/// Exit statuses of the `genflow` binary.
pub mod exit {
    pub const OK: i32 = 0;
    /// the run finished but an expected-outcome assertion failed
    pub const ASSERTION: i32 = 1;
    /// bad config, flags, or a precondition the config violates
    pub const CONFIG: i32 = 2;
    /// integration, quadrature or sampling failure
    pub const NUMERICAL: i32 = 3;
    /// reading the config or writing artifacts failed
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config does not match the schema:\n{}", .0.join("\n"))]
    Schema(Vec<String>),

    /// A core error raised while `module` was working on `stage`.
    #[error("{module}: {stage}: {source}")]
    Core {
        module: &'static str,
        stage: String,
        #[source]
        source: CoreError,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Core { source, .. } => match source {
                CoreError::Config(_) | CoreError::Domain(_) | CoreError::Input(_) | CoreError::Usage(_) => exit::CONFIG,
                CoreError::Construction { .. }
                | CoreError::Sampling { .. }
                | CoreError::Integration { .. }
                | CoreError::Numerical(_) => exit::NUMERICAL,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches module and stage context to core errors.
pub(crate) trait Context<T> {
    fn ctx(self, module: &'static str, stage: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for genflow_core::Result<T> {
    fn ctx(self, module: &'static str, stage: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core { module, stage: stage(), source })
    }
}
