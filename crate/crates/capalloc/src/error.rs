//! Error taxonomy shared across the crate.
//!
//! Errors fall into four families, and the CLI maps them onto exit codes:
//! usage errors (bad dimensions, invalid configs, infeasible policies) are
//! caller mistakes; unsupported-family errors mark operations that are only
//! defined in closed form for a restricted objective/capability family;
//! diagnostics cover data-dependent failures (no eligible steps, controller
//! stall); divergence aborts a run that produced non-finite numbers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (dimension mismatch, empty input, bad argument).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid or unresolvable configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Operation is not defined for this objective/capability family.
    #[error("unsupported family: {0}")]
    Unsupported(String),

    /// Data-dependent failure with diagnostic context.
    #[error("diagnostic: {0}")]
    Diagnostic(String),

    /// Governance controller failed to reach the constraint set.
    #[error(
        "governance did not converge within {iterations} iterations \
         (max constraint violation {violation:.3e}); last shares {last_shares:?}"
    )]
    GovernanceStall {
        iterations: usize,
        violation: f64,
        last_shares: Vec<f64>,
        last_direction: Vec<f64>,
    },

    /// A run produced a non-finite gradient or iterate.
    #[error("run diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Exit code for the CLI contract: 2 for usage/config problems,
    /// 3 for divergence, 1 for everything else that aborts a command.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Diverged { .. } => 3,
            _ => 1,
        }
    }
}
