use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library and the CLI.
#[derive(Debug, Error)]
pub enum AlsiError {
    #[error("{routine} failed to converge on matrix `{matrix}` after {iterations} iterations")]
    FactorizationFailure {
        routine: &'static str,
        matrix: String,
        iterations: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix `{matrix}` is not symmetric: max |a_ij - a_ji| = {max_asymmetry:e}")]
    NotSymmetric { matrix: String, max_asymmetry: f64 },

    #[error("matrix `{matrix}` is not positive semi-definite (min eigenvalue {min_eigenvalue:e}); pass it through psd_clip first")]
    NotPsd { matrix: String, min_eigenvalue: f64 },

    #[error("matrix `{matrix}` is singular (min eigenvalue {min_eigenvalue:e}); supply a positive ridge")]
    Singular { matrix: String, min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("binarization threshold undefined: every gene passed the CV filter and no override was given")]
    ThresholdUndefined,

    #[error("missing artifact {}: run `alsi {command}` first", path.display())]
    MissingArtifact { path: PathBuf, command: &'static str },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AlsiError {
    /// Attach a matrix name to errors raised by anonymous factorization calls.
    pub fn named(self, name: &str) -> Self {
        match self {
            AlsiError::FactorizationFailure {
                routine, iterations, ..
            } => AlsiError::FactorizationFailure {
                routine,
                matrix: name.to_string(),
                iterations,
            },
            AlsiError::NotSymmetric { max_asymmetry, .. } => AlsiError::NotSymmetric {
                matrix: name.to_string(),
                max_asymmetry,
            },
            AlsiError::NotPsd { min_eigenvalue, .. } => AlsiError::NotPsd {
                matrix: name.to_string(),
                min_eigenvalue,
            },
            AlsiError::Singular { min_eigenvalue, .. } => AlsiError::Singular {
                matrix: name.to_string(),
                min_eigenvalue,
            },
            other => other,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AlsiError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            AlsiError::Config(_) => 1,
            AlsiError::FactorizationFailure { .. }
            | AlsiError::NotPsd { .. }
            | AlsiError::Singular { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = AlsiError> = std::result::Result<T, E>;

/// Non-fatal condition recorded by a stage and surfaced in the run manifest.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Warning {
    pub source: String,
    pub message: String,
}

impl Warning {
    pub fn new(source: &str, message: impl Into<String>) -> Self {
        let w = Warning {
            source: source.to_string(),
            message: message.into(),
        };
        log::warn!("[{}] {}", w.source, w.message);
        w
    }
}
