use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] fillroute_core::Error),

    #[error("missing matrix: {0}")]
    MissingMatrix(String),

    #[error("store is missing {0}")]
    MissingFile(String),

    #[error("plan not found: {0}")]
    PlanNotFound(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("container {0} has no coordinates")]
    MissingCoordinates(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
