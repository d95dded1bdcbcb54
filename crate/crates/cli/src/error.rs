use std::fmt;

/// Failure of a subcommand, classified by process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Config error anchored at a JSON pointer into the run configuration.
    pub fn at(pointer: &str, msg: impl fmt::Display) -> Self {
        CliError::Config(format!("{pointer}: {msg}"))
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<aecm_core::Error> for CliError {
    fn from(e: aecm_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
