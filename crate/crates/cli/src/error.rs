use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Diverged(m) => m,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Diverged(_) => 4,
        })
    }
}

impl From<tsvdecomp::Error> for CliError {
    fn from(e: tsvdecomp::Error) -> Self {
        match e {
            tsvdecomp::Error::Diverged { .. } => CliError::Diverged(e.to_string()),
            tsvdecomp::Error::InvalidParameter { .. } | tsvdecomp::Error::UnknownPhantom(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Io(e.to_string()),
        }
    }
}
