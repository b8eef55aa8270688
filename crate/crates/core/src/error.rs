use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("support of {requested} points exceeds the enumeration cap of {cap}")]
    Capacity { requested: u128, cap: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown support point `{0}`")]
    UnknownPoint(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ranking does not agree with statistic `{statistic}`: {detail}")]
    Disagreement { statistic: String, detail: String },
    #[error("cannot parse rational `{0}`")]
    ParseRational(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
