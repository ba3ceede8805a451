use std::io;
use std::path::{Path, PathBuf};

use pairmix_core::Error as CoreError;

/// Everything a command can fail with. Each variant maps to one exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("SchemaMismatch: {0}")]
    Schema(String),
    #[error("UnknownStop: stop {stop} on trip {trip} is not on the route")]
    UnknownStop { stop: String, trip: String },
    #[error("{context}: {source}")]
    Model { context: String, source: CoreError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) | CliError::UnknownStop { .. } => 2,
            CliError::Model { source, .. } if is_data_error(source) => 2,
            CliError::Model { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

// Bad inputs rather than numerical trouble.
fn is_data_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::InvalidParams(_)
            | CoreError::InvalidAlpha
            | CoreError::EmptyPeriod { .. }
            | CoreError::InsufficientData { .. }
            | CoreError::LengthMismatch { .. }
            | CoreError::EmptyObservation
            | CoreError::InvalidSeries(_)
            | CoreError::OutOfWindow
    )
}

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Model { context: what(), source })
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(CliError::config("k").exit_code(), 2);
        assert_eq!(CliError::Schema("AD_TIME".into()).exit_code(), 2);
        let singular: Result<()> = Err(CoreError::SingularConstraintSystem { context: " for pair a>b".into() }).context(|| "forecast".into());
        let e = singular.unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("a>b"));
        let io = CliError::io(Path::new("x"), io::Error::from(io::ErrorKind::NotFound));
        assert_eq!(io.exit_code(), 4);
        let empty: Result<()> = Err(CoreError::EmptyPeriod { period: 2 }).context(|| "fit".into());
        assert_eq!(empty.unwrap_err().exit_code(), 2);
    }
}
