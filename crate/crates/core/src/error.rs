use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cost distribution: {0}")]
    InvalidDistribution(String),

    #[error("environment failed validation ({} violation(s)): {}", .0.len(), summarize(.0))]
    InvalidEnv(Vec<Violation>),

    /// A policy emitted a decision the pipeline cannot execute.
    #[error("contract violation in period {period}: {message}")]
    Contract { period: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("run failed for policy `{policy}` with seed {seed}: {source}")]
    Run {
        policy: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize(violations: &[crate::model::Violation]) -> String {
    violations
        .iter()
        .take(3)
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
