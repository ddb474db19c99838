use std::path::PathBuf;

use thiserror::Error;

/// Configuration problems. Field-level variants carry the dotted key path
/// and, when the value came from a file, the 1-based line it sits on.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),

    #[error("invalid value for `{key}`{}: {reason}", line_suffix(*.line))]
    Invalid {
        key: String,
        line: Option<usize>,
        reason: String,
    },

    #[error("pico placement failed after {attempts} attempts: constraint `{constraint}` could not be satisfied")]
    Placement { constraint: String, attempts: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            line: None,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed kpi log {path}: {reason}")]
    BadLog { path: PathBuf, reason: String },

    #[error("{failed} of {total} sweep points failed")]
    SweepFailed { failed: usize, total: usize },

    #[error("metrics: {0}")]
    Metrics(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}
