use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] skl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Output(String),
}

pub type RunResult<T> = Result<T, RunError>;

impl RunError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io { .. } | RunError::Output(_) => 3,
        }
    }

    /// Variant name of the underlying error.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Numerical(e) => match e {
                skl_core::Error::Domain(_) => "domain",
                skl_core::Error::DomainKind(_) => "domain-kind",
                skl_core::Error::Range(_) => "range",
                skl_core::Error::SingularPoint(_) => "singular-point",
                skl_core::Error::Coincidence(_) => "coincidence",
                skl_core::Error::Parameter(_) => "parameter",
                skl_core::Error::Accuracy(_) => "accuracy",
                skl_core::Error::Resolution(_) => "resolution",
                skl_core::Error::Placement(_) => "placement",
                skl_core::Error::Sampling(_) => "sampling",
                skl_core::Error::Solver(_) => "solver",
                skl_core::Error::Spectrum(_) => "spectrum",
                skl_core::Error::Eigen(_) => "eigen",
                skl_core::Error::Convergence(_) => "convergence",
                skl_core::Error::Precondition(_) => "precondition",
            },
            RunError::Io { .. } => "io",
            RunError::Output(_) => "output",
        }
    }

    pub fn record(&self, stage: &str) -> ErrorRecord {
        ErrorRecord { stage: stage.to_string(), kind: self.kind().to_string(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

/// Structured error entry of the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}
