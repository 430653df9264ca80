//! CLI error classification: validation problems exit 1, I/O problems
//! exit 2.

use std::fmt;

use avatar_core::bench::BenchError;
use avatar_core::cascade::CascadeError;
use avatar_core::config::ConfigError;
use avatar_core::conditioning::ConditioningError;
use avatar_core::director::DirectorError;
use avatar_core::media::MediaError;
use avatar_core::pipeline::PipelineError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        CliError::Io(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<MediaError> for CliError {
    fn from(e: MediaError) -> Self {
        match &e {
            MediaError::Io { .. } => CliError::io(e),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match &e {
            ConfigError::Unreadable { .. } => CliError::io(e),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match &e {
            BenchError::Unreadable { .. } => CliError::io(e),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ConditioningError> for CliError {
    fn from(e: ConditioningError) -> Self {
        match &e {
            ConditioningError::BadKeypointsFile { .. } => CliError::io(e),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<DirectorError> for CliError {
    fn from(e: DirectorError) -> Self {
        match &e {
            DirectorError::Transport(_) => CliError::io(e),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        match &e {
            CascadeError::Media(MediaError::Io { .. }) => CliError::io(e),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<avatar_core::backend::BackendError> for CliError {
    fn from(e: avatar_core::backend::BackendError) -> Self {
        match e {
            avatar_core::backend::BackendError::Media(m) => m.into(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Media(m) => m.into(),
            PipelineError::Director(d) => d.into(),
            PipelineError::Cascade(c) => c.into(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e)
    }
}
