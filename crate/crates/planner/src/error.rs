use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("variant mismatch: {0}")]
    VariantMismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("infeasible dataset: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] genplanner_core::CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
