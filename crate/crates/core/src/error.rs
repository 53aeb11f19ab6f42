use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Errors raised by the analytical models and the planner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("saturation: {0}")]
    Saturation(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl ModelError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        ModelError::Domain(msg.into())
    }

    /// True for errors that mean the requested operating point cannot be
    /// reached (saturation or infeasibility) rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, ModelError::Saturation(_) | ModelError::Infeasible(_))
    }
}

/// Errors raised by the particle simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("receptor placement failed: {0}")]
    Placement(String),
    #[error("insufficient events: {0}")]
    InsufficientEvents(String),
    #[error("invalid run request: {0}")]
    InvalidRun(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Errors raised by the experiment harness.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
