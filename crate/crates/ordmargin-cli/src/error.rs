//! Error type with a stable exit-code contract for scripting.

use std::fmt;
use std::path::Path;

use ordmargin_core::Error as CoreError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CliError>;

/// Everything a command can fail with, bucketed by exit code.
///
/// The mapping is part of the command-line contract: `0` success, `1` runtime
/// failure, `2` bad input (malformed files, invalid flag values, unsatisfiable
/// configurations), `3` missing or corrupt artifact (a file the command needs
/// that does not exist or cannot be trusted).
#[derive(Debug)]
pub enum CliError {
    /// The user gave us something malformed or unsatisfiable. Exit 2.
    BadInput { detail: String },
    /// A required artifact is absent or unreadable as what it claims to be.
    /// Exit 3.
    MissingArtifact { detail: String },
    /// The command itself failed mid-flight. Exit 1.
    Runtime { detail: String },
}

impl CliError {
    pub fn bad_input(detail: impl Into<String>) -> Self {
        CliError::BadInput {
            detail: detail.into(),
        }
    }

    pub fn missing_artifact(detail: impl Into<String>) -> Self {
        CliError::MissingArtifact {
            detail: detail.into(),
        }
    }

    pub fn runtime(detail: impl Into<String>) -> Self {
        CliError::Runtime {
            detail: detail.into(),
        }
    }

    /// The process exit code this error maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime { .. } => 1,
            CliError::BadInput { .. } => 2,
            CliError::MissingArtifact { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::BadInput { detail } => write!(f, "bad input: {detail}"),
            CliError::MissingArtifact { detail } => write!(f, "missing artifact: {detail}"),
            CliError::Runtime { detail } => write!(f, "{detail}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            // Violations of input contracts: the caller handed us data or a
            // configuration the library rejects up front.
            CoreError::InvalidSpec { .. }
            | CoreError::InvalidConfig { .. }
            | CoreError::InvalidRank { .. }
            | CoreError::InvalidBatch { .. } => CliError::BadInput {
                detail: err.to_string(),
            },
            // Mid-run numeric or structural failures.
            _ => CliError::Runtime {
                detail: err.to_string(),
            },
        }
    }
}

/// Read a file into a string, mapping absence to the missing-artifact bucket.
pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|err| {
        if err.kind() == std::io::ErrorKind::NotFound {
            CliError::missing_artifact(format!("{}: not found", path.display()))
        } else {
            CliError::runtime(format!("{}: {err}", path.display()))
        }
    })
}

/// Parse a JSON file into `T`, treating malformed content as bad input.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|err| CliError::bad_input(format!("{}: {err}", path.display())))
}

/// Write a string to a file, mapping failures to runtime errors.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|err| CliError::runtime(format!("{}: {err}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_documented_contract() {
        assert_eq!(CliError::runtime("x").exit_code(), 1);
        assert_eq!(CliError::bad_input("x").exit_code(), 2);
        assert_eq!(CliError::missing_artifact("x").exit_code(), 3);
    }

    #[test]
    fn core_spec_and_config_errors_become_bad_input() {
        let spec = CoreError::InvalidSpec {
            detail: String::from("x"),
        };
        assert_eq!(CliError::from(spec).exit_code(), 2);
        let numeric = CoreError::NonFinite {
            context: String::from("x"),
        };
        assert_eq!(CliError::from(numeric).exit_code(), 1);
    }

    #[test]
    fn reading_an_absent_file_is_a_missing_artifact() {
        let err = read_file(Path::new("/nonexistent/definitely-not-here.txt")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
