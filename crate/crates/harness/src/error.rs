use enkf_lab_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid study configuration: {0}")]
    Config(String),

    #[error("model hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Numerical(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit status: 2 for configuration or hypothesis problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Hypothesis(_) | HarnessError::InsufficientData(_) => 2,
            HarnessError::Json(_) => 2,
            HarnessError::Numerical(e) => match e {
                CoreError::Dimension(_)
                | CoreError::EnsembleTooSmall { .. }
                | CoreError::InvalidArgument(_)
                | CoreError::NotStabilizable(_)
                | CoreError::Json(_) => 2,
                _ => 3,
            },
            HarnessError::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
