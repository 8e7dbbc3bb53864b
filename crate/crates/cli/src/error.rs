use std::path::PathBuf;

use klyshko_core::Error as CoreError;

/// Exit status for each failure class.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("cannot create output directory {path}: {source}")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::ConfigRead { .. } | Self::ConfigParse { .. } => EXIT_CONFIG,
            Self::OutputDir { .. } => EXIT_IO,
            Self::Core(e) => match e {
                CoreError::Io { .. } | CoreError::Parse { .. } | CoreError::Unsorted { .. } => EXIT_IO,
                CoreError::Domain { .. } | CoreError::InvalidInput(_) => EXIT_CONFIG,
                CoreError::NegativeCoincidences { .. }
                | CoreError::Degenerate(_)
                | CoreError::Numerical(_)
                | CoreError::NonConvergence { .. } => EXIT_NUMERICAL,
            },
        }
    }

    /// Wraps a core error raised while checking configuration values.
    pub fn config(e: CoreError) -> Self {
        Self::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
