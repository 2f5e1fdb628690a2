use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the model, estimators and optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("insurer loading theta={theta} must be below reinsurer loading zeta={zeta}")]
    LoadingOrder { theta: f64, zeta: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("infeasible model: {0}")]
    Infeasible(String),

    #[error("weight function evaluated outside (0, T): t={t}, T={horizon}")]
    WeightDomain { t: f64, horizon: f64 },

    #[error("Malliavin weights are undefined on scenarios without claims")]
    NoClaims,

    #[error("non-finite gradient at iteration {iteration}: {detail}")]
    NonFiniteGradient { iteration: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::LoadingOrder { .. } => 2,
            Error::Diagnostic(_) => 4,
            Error::Io { .. } => 5,
            _ => 3,
        }
    }
}
