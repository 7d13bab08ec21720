use std::process::ExitCode;

use dfprompt::config::ConfigError;
use dfprompt::data::DataError;
use dfprompt::policy::PolicyError;
use dfprompt::scoring::WorldError;
use dfprompt::{PromptError, ScoreError};
use thiserror::Error;

/// Failure classes with distinct exit codes: 1 for IO, 2 for malformed
/// input, schema or configuration, 3 when the scoring environment fails.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Env(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io(_) => ExitCode::from(1),
            CliError::Input(_) => ExitCode::from(2),
            CliError::Env(_) => ExitCode::from(3),
        }
    }

    pub fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Input(format!("{}: {e}", e.kind()))
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::EnvUnavailable(_) | ScoreError::Timeout | ScoreError::ProtocolError(_) => {
                CliError::Env(e.to_string())
            }
            ScoreError::UnknownToken(_) | ScoreError::InvalidRequest(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<WorldError> for CliError {
    fn from(e: WorldError) -> Self {
        match e {
            WorldError::Io(io) => CliError::Io(format!("world file: {io}")),
            other => CliError::Input(format!("world file: {other}")),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Invalid(_) => CliError::Input(e.to_string()),
            ConfigError::World(w) => w.into(),
            ConfigError::Score(s) => s.into(),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => CliError::Io(e.to_string()),
            DataError::Schema { .. } | DataError::Config(_) => CliError::Input(e.to_string()),
            DataError::Score(s) => s.into(),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Io(_) | PolicyError::NonFiniteLoss { .. } => CliError::Io(e.to_string()),
            PolicyError::Score(s) => s.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}
