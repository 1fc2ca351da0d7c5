use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] casimir_grating::Error),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{count} quadrature node(s) failed; first: {first}")]
    FailedNodes { count: usize, first: String },
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok = 0,
    CheckFailed = 1,
    Failed = 2,
}

impl Outcome {
    pub fn code(self) -> i32 {
        self as i32
    }
}
