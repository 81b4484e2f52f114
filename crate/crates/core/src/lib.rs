//! Discrete-time simulator for wireless rechargeable sensor networks served
//! by several mobile charging vehicles, with ISAC-gated charging locks.
//!
//! A run generates a seeded device layout, drains devices by their
//! consumption rate, and lets one scheduling policy dispatch the vehicles.
//! Three policies are available: the ISAC-assisted multi-attribute queue
//! with partial charging ([`SchedulerPolicy::Isacm`]), nearest-first and
//! first-come-first-served, both with full charging.

pub mod charging;
pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
pub mod isac;
pub mod metrics;
pub mod model;
pub mod scheduler;
pub mod sweep;

pub use config::{IsacConfig, ScenarioConfig, SchedulerPolicy};
pub use engine::{run, run_with_options, Event, EventKind, RunOptions, RunOutput, SimState};
pub use error::{Result, SimError};
pub use metrics::{aggregate, MetricsReport, SummaryRow};
pub use sweep::{run_sweep, SweepSpec};
