use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate container id {0}")]
    DuplicateId(String),

    #[error("unknown container id {0}")]
    UnknownContainer(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large: {count} containers, oracle limit is {limit}")]
    InstanceTooLarge { count: usize, limit: usize },

    #[error("model/series window mismatch: model window {model}, series offers {series}")]
    WindowMismatch { model: usize, series: usize },

    #[error("no overlapping forecast/actual pairs")]
    NoOverlap,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
