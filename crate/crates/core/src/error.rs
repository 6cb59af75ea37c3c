use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("retraction produced a rank-deficient factor")]
    RetractionFailure,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("row subproblem has a zero anchor; its diagonal constraint cannot be met")]
    InfeasibleRow,

    #[error("degenerate code: |u_k·v_k| = {value:e} for user {user}")]
    DegenerateCode { user: usize, value: f64 },

    #[error("pipeline failed: {0}")]
    Pipeline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
