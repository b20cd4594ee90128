use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags, unreadable or malformed input.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dyadlab_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// 2 for usage and input errors, 1 for failures during a computation.
    pub fn exit_code(&self) -> i32 {
        use dyadlab_core::Error as E;
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Core(
                E::Config(_) | E::Format(_) | E::Io(_) | E::Json(_) | E::InvalidWeight(_) | E::GridMismatch { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
