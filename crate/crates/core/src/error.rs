//! Crate-wide error type and result alias.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric precondition was violated: non-finite input, sign
    /// constraint, empty input set, value outside its admissible band.
    #[error("domain error: {0}")]
    Domain(String),

    /// A component attempted retro-causal scheduling.
    #[error("causality error: event scheduled at t={fire_time} while engine time is t={now}")]
    Causality { fire_time: f64, now: f64 },

    /// A component handler failed during dispatch; the engine aborts the
    /// run and leaves the partial trace in place with an error mark.
    #[error("component '{component}' failed at t={time}: {message}")]
    Handler {
        component: String,
        time: f64,
        message: String,
    },

    /// Scenario configuration was rejected (parse or validation).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for anything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
