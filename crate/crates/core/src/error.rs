use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0} is not in the graph")]
    UnknownVertex(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exact computation unavailable: {size} exceeds the cap of {cap}")]
    ExactUnavailable { size: usize, cap: usize },

    #[error("conditioning event has zero probability")]
    ZeroProbability,

    #[error("no face data available: {0}")]
    NoDual(String),

    #[error("decision tree rule violation: {0}")]
    InvalidTree(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
