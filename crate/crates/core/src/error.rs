use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trace is empty")]
    EmptyTrace,

    #[error("trace {title}: line {line}: {reason}")]
    TraceParse {
        title: String,
        line: usize,
        reason: String,
    },

    #[error("invalid input `{name}`: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("slot {slot} is outside session range 1..={total}")]
    SlotOutOfRange { slot: usize, total: usize },

    #[error("inconsistent session state at slot {slot}: {reason}")]
    InconsistentState { slot: usize, reason: String },

    #[error("processing gain {0} must exceed 2 for the inflection point to exist")]
    ProcessingGain(f64),

    #[error("infeasible concave subproblem: minimum powers {p_min_sum} W exceed budget {budget} W")]
    Infeasible { p_min_sum: f64, budget: f64 },

    #[error("ill-conditioned SINR system: {0}")]
    IllConditioned(String),

    #[error("no allocation phase succeeded")]
    NoPhaseSucceeded,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Output(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
