//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the game engine, planners and agent construction.
#[derive(Debug, Error)]
pub enum GabeError {
    /// An agent returned an action index outside its action set.
    #[error("agent `{agent}` returned action {action} but state has only {available} actions")]
    ContractViolation {
        agent: String,
        action: usize,
        available: usize,
    },

    /// A configured resource bound (state count, game tree size) was exceeded.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// An iterative solver failed to converge within its iteration cap.
    #[error("solver diverged: {0}")]
    Divergence(String),

    /// Invalid configuration (bad config file, unknown agent name, bad bounds).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, GabeError>;
