use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Model(#[from] lifeplan::error::Error),

    #[error("unknown table {0:?}; run `lifeplan reproduce --list` for the catalogue")]
    UnknownTable(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("no certified result: {0}")]
    Stability(String),
}

impl CliError {
    /// 1 invariant violation, 2 validation failure, 3 stability-cap breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Stability(_) => 3,
            CliError::Model(e) if e.is_stability() => 3,
            _ => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
