use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed table document: {0}")]
    Parse(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("negative count {value} in block {block}")]
    NegativeCount { block: String, value: f64 },

    #[error("supplementary block {0} has zero total")]
    EmptySupplementary(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("singular odds system: {0}")]
    Singular(String),

    #[error("degenerate margin: {0}")]
    DegenerateMargin(String),

    #[error("infeasible boundary: every level of {0} would be pinned to zero")]
    InfeasibleBoundary(String),

    #[error("EM failure: {0}")]
    Em(String),

    #[error("model not testable against the perfect fit (df = {0})")]
    NotTestable(i64),

    #[error("degenerate odds ratio: {0}")]
    DegenerateOddsRatio(String),

    #[error("log-linear decomposition unavailable: {0}")]
    Decomposition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
