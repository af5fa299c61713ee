use std::fmt;

use rwre_core::Error;

/// Exit code 2 for configuration problems, 1 for everything that fails
/// after the configuration was accepted.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config { name: String, reason: String },
    Compute(String),
    Io(String),
}

impl CliError {
    pub fn config(name: impl Into<String>, reason: impl fmt::Display) -> Self {
        CliError::Config { name: name.into(), reason: reason.to_string() }
    }

    /// Wrap a core error raised while interpreting parameter `name`.
    pub fn param(name: &str) -> impl Fn(Error) -> CliError + '_ {
        move |e| match e {
            Error::InvalidParameter { name: inner, reason } => CliError::config(format!("{name}.{inner}"), reason),
            other => CliError::config(name, other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => CliError::config(name, reason),
            Error::InvalidTree(_)
            | Error::InvalidProfile(_)
            | Error::InvalidLaw(_)
            | Error::InvalidBoundary(_)
            | Error::InvalidGauge(_)
            | Error::InvalidTarget(_)
            | Error::NeedsQuantization { .. } => CliError::config(kind(&e), e),
            other => CliError::Compute(other.to_string()),
        }
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidTree(_) => "tree",
        Error::InvalidProfile(_) => "growth",
        Error::InvalidLaw(_) | Error::NeedsQuantization { .. } => "law",
        Error::InvalidBoundary(_) => "boundary",
        Error::InvalidGauge(_) => "gauge",
        Error::InvalidTarget(_) => "target",
        _ => "input",
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { name, reason } => write!(f, "invalid `{name}`: {reason}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}
