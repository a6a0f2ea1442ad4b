//! Error types shared across the simulator.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CeasError>;

/// Errors surfaced by simulator components.
#[derive(Debug, Error)]
pub enum CeasError {
    /// A configuration value is missing, unknown, or out of range.
    /// Always names the offending key.
    #[error("config error ({key}): {message}")]
    Config { key: String, message: String },

    /// Vector or matrix dimensions do not line up.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// A numeric argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The active subgraph is disconnected where connectivity is required.
    #[error("active subgraph is disconnected")]
    Disconnected,

    /// Every node is quarantined; consensus can make no progress.
    #[error("consensus stall at round {round}: all nodes quarantined")]
    ConsensusStall { round: u64 },

    /// Regular-graph construction could not produce a simple connected graph.
    #[error("topology generation failed: {0}")]
    Topology(String),

    /// Malformed metrics CSV fed to an analysis command.
    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CeasError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CeasError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        CeasError::Domain(message.into())
    }
}
