//! Discrete-time system-level simulator for two-tier LTE heterogeneous
//! networks (macro + pico, co-channel downlink).
//!
//! Each base station learns its cell range expansion bias (REB) with either
//! a UCB bandit or a satisfaction-driven reward-inaction automaton, and
//! schedules resource blocks with a velocity- and history-aware
//! proportional-fair rule. A classical baseline (fixed REB, plain PF with
//! average-rate reset at handover) is available for comparison.
//!
//! The per-TTI loop lives in [`engine`]; KPI aggregation in [`metrics`];
//! configuration and sweep execution in [`config`] and [`experiment`].

pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod handover;
pub mod kpi;
pub mod learning;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod scheduler;

pub use config::RunConfig;
pub use engine::{run_simulation, SimulationOutput, World};
pub use error::{ConfigError, SimError};
pub use kpi::KpiLog;
pub use metrics::KpiReport;

use serde::{Deserialize, Serialize};

/// Simulation step (TTI) length in milliseconds.
pub const TTI_MS: u64 = 1;

/// Index of a base station / cell. Macro sector cells come first, then picos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UeId(pub usize);

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cell{}", self.0)
    }
}

impl std::fmt::Display for UeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ue{}", self.0)
    }
}

/// Network tier of a base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Macro,
    Pico,
}
