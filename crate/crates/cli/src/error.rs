use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{location}: {message}")]
    Config { location: String, message: String },
    #[error(transparent)]
    Core(#[from] opcalc::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
