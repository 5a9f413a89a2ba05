use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage error at `{path}`: {message}")]
    Usage { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] tvsnet::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl HarnessError {
    /// Process exit status: 1 usage, 2 run failure, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage { .. } => 1,
            HarnessError::Io(_) | HarnessError::Core(_) => 2,
            HarnessError::Verification(_) => 3,
        }
    }

    pub fn reason_code(&self) -> &'static str {
        match self {
            HarnessError::Usage { .. } => "usage",
            HarnessError::Io(_) => "io",
            HarnessError::Core(e) => e.reason_code(),
            HarnessError::Verification(_) => "verification_failed",
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
