use thiserror::Error;

/// Errors raised by the evaluation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("axis alignment mismatch: {0}")]
    Alignment(String),

    #[error("no complete season in the daily record")]
    EmptySeasons,

    #[error("remap plan error: {0}")]
    Plan(String),

    #[error("insufficient data: {got} observations, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("too few bootstrap replicates: {got}, need at least {need}")]
    TooFewReplicates { got: usize, need: usize },

    #[error("bootstrap replicate failures {failed}/{total} exceed 10%")]
    ReplicateFailures { failed: usize, total: usize },

    #[error("region skipped: {0}")]
    RegionSkipped(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("scenario validation failed: {0}")]
    Scenario(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
