use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in '{key}': {message}")]
    Config { key: String, message: String },

    #[error("estimated memory {needed_gib:.2} GiB for {what} exceeds the cap of {cap_gib:.2} GiB")]
    Memory {
        what: String,
        needed_gib: f64,
        cap_gib: f64,
    },

    #[error(transparent)]
    Solver(#[from] diracgb::error::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 3 for a violated numerical
    /// invariant, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Memory { .. } => 2,
            HarnessError::Solver(e) if e.is_numerical() => 3,
            HarnessError::Solver(diracgb::error::Error::InvalidInput(_))
            | HarnessError::Solver(diracgb::error::Error::Parse { .. })
            | HarnessError::Solver(diracgb::error::Error::GridMismatch(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
