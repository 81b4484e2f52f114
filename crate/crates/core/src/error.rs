//! Error types shared across the simulator.

use thiserror::Error;

use crate::config::Violation;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", format_violations(.0))]
    Config(Vec<Violation>),

    #[error("configuration error: {0}")]
    Setup(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unknown device id {0}")]
    UnknownDevice(usize),

    #[error("device {device} is already locked to mcv {locked_to}, refusing lock to mcv {requested}")]
    LockConflict {
        device: usize,
        locked_to: usize,
        requested: usize,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("mcv {mcv} needs {required:.3} J for the plan and return trip but holds {available:.3} J")]
    InsufficientEnergy {
        mcv: usize,
        required: f64,
        available: f64,
    },

    #[error("observation window too short: delay of {delay} samples exceeds {max_lag} lags")]
    Window { delay: usize, max_lag: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invariant violated at t={time:.3}s: {message}")]
    Invariant { time: f64, message: String },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.field, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, SimError>;
