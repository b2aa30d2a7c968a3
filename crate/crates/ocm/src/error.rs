use std::io;
use std::path::PathBuf;

use ocm_core::bayes::BayesError;
use ocm_core::model::ModelError;
use ocm_core::qvi::QviError;
use ocm_core::sim::SimError;
use ocm_core::solver::SolverError;

/// Exit status classes of the command-line driver.
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum OcmError {
    /// Bad input; `path` locates the offending key, e.g. `transition[1][3]`.
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, OcmError>;

impl OcmError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        OcmError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        OcmError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            OcmError::Config { .. } => EXIT_CONFIG,
            OcmError::Convergence(_) => EXIT_CONVERGENCE,
            OcmError::Resource(_) => EXIT_RESOURCE,
            OcmError::Io { .. } | OcmError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

// Key path of a model error, matching the JSON layout of model files.
fn model_error_path(e: &ModelError) -> String {
    match e {
        ModelError::NotStochastic { action, row, .. } | ModelError::NegativeEntry { action, row, .. } => {
            format!("transition[{action}][{row}]")
        }
        ModelError::NotGenerator { action, row, .. } => format!("generator[{action}][{row}]"),
        ModelError::SwitchingCost { from, to, .. } => format!("switching_cost[{from}][{to}]"),
        ModelError::InvalidParameter { name, .. } => (*name).to_string(),
        ModelError::Dimension { what, .. } => what.split(' ').next().unwrap_or(what).to_string(),
        ModelError::InvalidAction { .. } => "actions".into(),
        ModelError::Numeric(_) => "generator".into(),
    }
}

impl From<ModelError> for OcmError {
    fn from(e: ModelError) -> Self {
        OcmError::config(model_error_path(&e), e.to_string())
    }
}

impl From<QviError> for OcmError {
    fn from(e: QviError) -> Self {
        match e {
            QviError::Model(m) => m.into(),
            other => OcmError::Internal(other.to_string()),
        }
    }
}

impl From<SolverError> for OcmError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Qvi(q) => q.into(),
            SolverError::Config(m) => OcmError::config("solver", m),
            e @ (SolverError::NotConverged { .. } | SolverError::Singular { .. }) => {
                OcmError::Convergence(e.to_string())
            }
        }
    }
}

impl From<BayesError> for OcmError {
    fn from(e: BayesError) -> Self {
        match e {
            BayesError::Argument(m) => OcmError::config("bayes", m),
            BayesError::Resource { .. } => OcmError::Resource(e.to_string()),
            BayesError::Model(m) => m.into(),
            BayesError::DegenerateObservation => OcmError::Internal(e.to_string()),
        }
    }
}

impl From<SimError> for OcmError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Argument(m) => OcmError::config("simulate", m),
            SimError::Bayes(b) => b.into(),
            SimError::Model(m) => m.into(),
            SimError::Qvi(q) => q.into(),
            SimError::Lattice { .. } => OcmError::Internal(e.to_string()),
        }
    }
}
