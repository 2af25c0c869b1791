use std::fmt;

use tritrophic_hopf::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
    Io(std::io::Error),
    /// The command ran but some requested result could not be computed.
    Unconverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(CoreError::Constraint(_)) => 4,
            CliError::Core(CoreError::InvalidParameter { .. }) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 3,
            CliError::Unconverged(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Unconverged(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
