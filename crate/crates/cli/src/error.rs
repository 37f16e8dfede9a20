use dmr::DmrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad schema, unreadable file or malformed data.
    #[error("{0}")]
    Input(String),
    /// The data parsed but the fit is numerically impossible.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<DmrError> for CliError {
    fn from(e: DmrError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
