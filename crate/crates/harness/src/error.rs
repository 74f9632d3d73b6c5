use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config does not match the schema: {message}")]
    Schema { message: String, keys: Vec<String> },
    #[error("epsilon {epsilon} is not below {threshold_name} = {threshold}")]
    Admissibility { epsilon: f64, threshold_name: String, threshold: f64 },
    #[error("experiment failed: {0}")]
    Runtime(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Machine-readable error, written to stderr and into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keys: Vec<String>,
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), message: err.to_string() }
    }

    pub fn runtime(err: impl std::fmt::Display) -> Self {
        Self::Runtime(err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } => 2,
            Self::Admissibility { .. } => 3,
            Self::Runtime(_) => 4,
            Self::Io { .. } => 5,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let kind = match self {
            Self::Schema { .. } => "schema",
            Self::Admissibility { .. } => "admissibility",
            Self::Runtime(_) => "runtime",
            Self::Io { .. } => "io",
        };
        let keys = match self {
            Self::Schema { keys, .. } => keys.clone(),
            _ => Vec::new(),
        };
        ErrorRecord { kind: kind.into(), message: self.to_string(), keys }
    }
}
