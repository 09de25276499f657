use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum LqgError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("green function is singular at coincident points")]
    Singularity,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("operator not positive: eigenvalue #{index} of the symmetrised operator is {value:e}")]
    NotPositive { index: usize, value: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LqgError {
    pub fn config(msg: impl Into<String>) -> Self {
        LqgError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        LqgError::Numerical(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        LqgError::Domain(msg.into())
    }

    /// Prefixes the message with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            LqgError::Config(m) => LqgError::Config(format!("[{stage}] {m}")),
            LqgError::Domain(m) => LqgError::Domain(format!("[{stage}] {m}")),
            LqgError::Numerical(m) => LqgError::Numerical(format!("[{stage}] {m}")),
            LqgError::Format(m) => LqgError::Format(format!("[{stage}] {m}")),
            LqgError::Singularity => LqgError::Numerical(format!("[{stage}] green function is singular at coincident points")),
            LqgError::NotPositive { index, value } => {
                log::error!("[{stage}] operator not positive");
                LqgError::NotPositive { index, value }
            }
            LqgError::Io(e) => LqgError::Io(std::io::Error::new(e.kind(), format!("[{stage}] {e}"))),
        }
    }

    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LqgError::Config(_) | LqgError::Domain(_) | LqgError::Format(_) => 2,
            LqgError::Singularity | LqgError::Numerical(_) | LqgError::NotPositive { .. } => 3,
            LqgError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LqgError>;
