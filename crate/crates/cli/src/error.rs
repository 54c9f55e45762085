use std::fmt;

use pclab_core::PcError;

/// Failure of a subcommand, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config file, unknown key, missing data. Exit code 2.
    Config(String),
    /// Non-finite values or divergence. Exit code 3.
    Numerical(String),
    /// Dense Hessian over the row cap. Exit code 4.
    Resource(String),
    /// Could not write outputs. Exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Resource(m) => write!(f, "resource cap: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<PcError> for CliError {
    fn from(e: PcError) -> Self {
        let msg = e.to_string();
        match e {
            PcError::ResourceCap { .. } => CliError::Resource(msg),
            PcError::Divergence { .. } | PcError::Linalg(_) | PcError::Degenerate(_) => CliError::Numerical(msg),
            PcError::Io { .. } => CliError::Io(msg),
            PcError::InvalidSpec(_)
            | PcError::Dimension(_)
            | PcError::Unsupported(_)
            | PcError::InvalidArgument(_)
            | PcError::Data(_) => CliError::Config(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
