use std::fmt;

use aged_core::Error;

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input, flags or configuration (exit 1).
    Validation(String),
    /// Everything else: I/O, numerical failure, internal checks (exit 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    /// Prefixes the message with where it came from.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Malformed { .. }
            | Error::DuplicateFrame { .. }
            | Error::UnknownMention { .. }
            | Error::FeOrderMismatch { .. }
            | Error::UnknownFrame { .. }
            | Error::UnknownFe { .. }
            | Error::InvalidSpan { .. }
            | Error::NoSuchFe { .. }
            | Error::NoSuchFrame(_)
            | Error::FrameMismatch { .. }
            | Error::InvalidConfig(_)
            | Error::TooLong { .. }
            | Error::Misaligned { .. }
            | Error::Checkpoint(_)
            | Error::Json(_) => CliError::Validation(message),
            Error::Io { .. }
            | Error::IdOutOfRange { .. }
            | Error::ShapeMismatch(_)
            | Error::LabelOutOfRange { .. }
            | Error::NonFiniteLoss { .. }
            | Error::Experiment(_) => CliError::Runtime(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
