use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(deep_hgp::Error),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<deep_hgp::Error> for CliError {
    fn from(e: deep_hgp::Error) -> Self {
        use deep_hgp::Error as E;
        match e {
            E::InvalidConfig(msg) => CliError::Config(msg),
            E::EmptyActiveSet | E::DimensionMismatch { .. } | E::CapacityExceeded { .. } | E::UnsupportedSmoothness(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
