//! Per-TTI resource block allocation.
//!
//! Both modes run a greedy per-RB proportional-fair argmax of
//! `rate_rb / avg_rate`. The context-aware mode additionally breaks
//! (near-)ties in favour of the slowest UE; "near" is a relative band of
//! `epsilon_tie` below the best metric.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::UeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    ClassicalPf,
    ContextAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// `None` follows the learner: classical PF for the baseline, context
    /// aware otherwise.
    pub scheduler_mode: Option<SchedulerMode>,
    /// Whether average-rate history follows the UE across handovers. `None`
    /// ties it to the scheduler mode.
    pub history_transfer: Option<bool>,
    pub pf_floor_bps: f64,
    pub epsilon_tie: f64,
    pub history_window_ms: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            scheduler_mode: None,
            history_transfer: None,
            pf_floor_bps: 1e3,
            epsilon_tie: 1e-9,
            history_window_ms: 100.0,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.pf_floor_bps > 0.0) {
            return Err(ConfigError::invalid("scheduler.pf_floor_bps", "must be > 0"));
        }
        if !(self.epsilon_tie >= 0.0 && self.epsilon_tie < 1.0) {
            return Err(ConfigError::invalid("scheduler.epsilon_tie", "must be in [0, 1)"));
        }
        if !(self.history_window_ms > 0.0) {
            return Err(ConfigError::invalid("scheduler.history_window_ms", "must be > 0"));
        }
        Ok(())
    }
}

/// One UE competing for an RB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub ue: UeId,
    pub rb_rate_bps: f64,
    pub avg_rate_bps: f64,
    pub speed_kmh: f64,
}

fn pf_metric(c: &Candidate, floor: f64) -> f64 {
    c.rb_rate_bps / c.avg_rate_bps.max(floor)
}

/// Picks the UE for one RB, or `None` for an empty candidate list.
///
/// Result is independent of candidate order: ties resolve by (speed, id) in
/// context-aware mode and by id in classical mode.
pub fn schedule_rb(candidates: &[Candidate], mode: SchedulerMode, epsilon_tie: f64, floor_bps: f64) -> Option<UeId> {
    let best = candidates
        .iter()
        .map(|c| pf_metric(c, floor_bps))
        .fold(f64::NEG_INFINITY, f64::max);
    if candidates.is_empty() {
        return None;
    }
    match mode {
        SchedulerMode::ClassicalPf => candidates
            .iter()
            .filter(|c| pf_metric(c, floor_bps) == best)
            .map(|c| c.ue)
            .min(),
        SchedulerMode::ContextAware => {
            let cutoff = best * (1.0 - epsilon_tie);
            candidates
                .iter()
                .filter(|c| {
                    let m = pf_metric(c, floor_bps);
                    m >= cutoff || m == best
                })
                .min_by(|a, b| a.speed_kmh.total_cmp(&b.speed_kmh).then(a.ue.cmp(&b.ue)))
                .map(|c| c.ue)
        }
    }
}

/// One cell's allocation for a TTI.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellAllocation {
    pub rb_owner: Vec<Option<UeId>>,
    /// Rate achieved on each RB by its owner (0 when unallocated).
    pub rb_rate_bps: Vec<f64>,
}

impl CellAllocation {
    pub fn empty(rb_count: usize) -> Self {
        Self {
            rb_owner: vec![None; rb_count],
            rb_rate_bps: vec![0.0; rb_count],
        }
    }

    /// Total rate of `ue` this TTI.
    pub fn ue_rate_bps(&self, ue: UeId) -> f64 {
        self.rb_owner
            .iter()
            .zip(&self.rb_rate_bps)
            .filter(|(o, _)| **o == Some(ue))
            .map(|(_, r)| r)
            .sum()
    }
}

/// All cells' allocations, indexed by cell id.
pub type TtiAllocation = Vec<CellAllocation>;

/// Inputs for one cell's TTI: its UEs with their per-RB achievable rates.
#[derive(Debug, Clone)]
pub struct CellUe<'a> {
    pub ue: UeId,
    pub rb_rates_bps: &'a [f64],
    pub avg_rate_bps: f64,
    pub speed_kmh: f64,
}

/// Allocates every RB of a cell in index order.
pub fn schedule_tti(ues: &[CellUe<'_>], rb_count: usize, mode: SchedulerMode, epsilon_tie: f64, floor_bps: f64) -> CellAllocation {
    let mut alloc = CellAllocation::empty(rb_count);
    if ues.is_empty() {
        return alloc;
    }
    let mut cands: Vec<Candidate> = ues
        .iter()
        .map(|u| Candidate {
            ue: u.ue,
            rb_rate_bps: 0.0,
            avg_rate_bps: u.avg_rate_bps,
            speed_kmh: u.speed_kmh,
        })
        .collect();
    for rb in 0..rb_count {
        for (c, u) in cands.iter_mut().zip(ues) {
            c.rb_rate_bps = u.rb_rates_bps[rb];
        }
        let owner = schedule_rb(&cands, mode, epsilon_tie, floor_bps);
        alloc.rb_owner[rb] = owner;
        if let Some(o) = owner {
            let idx = ues.iter().position(|u| u.ue == o).expect("owner is a candidate");
            alloc.rb_rate_bps[rb] = ues[idx].rb_rates_bps[rb];
        }
    }
    alloc
}

/// Sum of allocated RB rates in the cell.
pub fn cell_load(alloc: &CellAllocation) -> f64 {
    alloc
        .rb_owner
        .iter()
        .zip(&alloc.rb_rate_bps)
        .filter(|(o, _)| o.is_some())
        .map(|(_, r)| r)
        .sum()
}

/// Moving-average rate over a window of `window_ms` at `sample_ms` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateHistory {
    pub avg_rate_bps: f64,
    pub window_ms: f64,
    pub sample_ms: f64,
}

impl RateHistory {
    pub fn new(window_ms: f64, sample_ms: f64) -> Self {
        Self {
            avg_rate_bps: 0.0,
            window_ms,
            sample_ms,
        }
    }

    pub fn samples_in_window(&self) -> f64 {
        self.window_ms / self.sample_ms
    }

    pub fn update(self, inst_rate_bps: f64) -> Self {
        Self {
            avg_rate_bps: update_avg_rate(self.avg_rate_bps, inst_rate_bps, self.window_ms, self.sample_ms),
            ..self
        }
    }
}

/// `(T·avg + inst·T_s) / (T + T_s)`.
pub fn update_avg_rate(avg_bps: f64, inst_bps: f64, window_ms: f64, sample_ms: f64) -> f64 {
    (window_ms * avg_bps + inst_bps * sample_ms) / (window_ms + sample_ms)
}

/// Average rate in the target cell after a history-preserving handover:
/// the source-cell average blended with the first rate served by the target.
pub fn transfer_history(source_avg_bps: f64, first_target_inst_bps: f64, window_ms: f64, sample_ms: f64) -> f64 {
    (window_ms * source_avg_bps + first_target_inst_bps * sample_ms) / (window_ms + sample_ms)
}
