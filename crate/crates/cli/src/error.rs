use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] circwords::Error),
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Document { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(circwords::Error::Undecidable(_)) => 3,
            CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => 1,
            _ => 2,
        }
    }
}
