//! RSRP measurement chain, biased entry condition with time-to-trigger, and
//! handover outcome classification (success / failure / ping-pong).
//!
//! Sampling: one RSRP sample every 40 ms; layer 1 averages five samples
//! (one output per 200 ms, dB domain); layer 3 is a first-order IIR.
//!
//! The entry condition is evaluated as written
//! `P_serving + β_serving < P_target + β_target + m_hist`, i.e. the margin
//! sits on the target side, so a positive `hysteresis_db` makes handover
//! *easier*. Use a negative value for the conventional "target must be
//! better by X dB" behaviour.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scenario::HandoverRecord;
use crate::CellId;

pub const L1_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandoverConfig {
    pub ttt_ms: u64,
    pub hysteresis_db: f64,
    pub l3_coefficient: f64,
    pub qout_db: f64,
    pub pp_window_ms: u64,
    pub ho_execution_delay_ms: u64,
    pub measurement_period_ms: u64,
    pub hof_recovery: HofRecovery,
}

/// What happens to the UE after a handover failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HofRecovery {
    /// The handover is aborted and the UE stays on the source cell.
    Stay,
    /// The UE re-establishes its connection at the target cell, with a fresh
    /// rate history. Not counted as a successful handover.
    Reestablish,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            ttt_ms: 480,
            hysteresis_db: 0.0,
            l3_coefficient: 0.5,
            qout_db: -8.0,
            pp_window_ms: 1000,
            ho_execution_delay_ms: 50,
            measurement_period_ms: 40,
            hof_recovery: HofRecovery::Stay,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        if self.ttt_ms == 0 {
            return Err(ConfigError::invalid("handover.ttt_ms", "must be > 0"));
        }
        if self.ttt_ms != 40 && self.ttt_ms != 480 {
            warnings.push(format!(
                "handover.ttt_ms = {} differs from the reference values 40 and 480",
                self.ttt_ms
            ));
        }
        if !(self.l3_coefficient > 0.0 && self.l3_coefficient <= 1.0) {
            return Err(ConfigError::invalid("handover.l3_coefficient", "must be in (0, 1]"));
        }
        if !self.hysteresis_db.is_finite() || !self.qout_db.is_finite() {
            return Err(ConfigError::invalid("handover.hysteresis_db", "must be finite"));
        }
        if self.measurement_period_ms == 0 {
            return Err(ConfigError::invalid("handover.measurement_period_ms", "must be > 0"));
        }
        Ok(warnings)
    }

    /// Number of wideband SINR samples the failure check needs to see.
    pub fn sinr_window_len(&self) -> usize {
        (self.ttt_ms + self.ho_execution_delay_ms + 1) as usize
    }
}

/// Arithmetic mean of exactly five dB samples; `None` otherwise.
pub fn l1_filter(samples: &[f64]) -> Option<f64> {
    if samples.len() != L1_SAMPLES {
        return None;
    }
    Some(samples.iter().sum::<f64>() / L1_SAMPLES as f64)
}

/// First-order IIR: `(1 - a)·prev + a·l1`.
pub fn l3_filter(prev: f64, l1: f64, a: f64) -> f64 {
    (1.0 - a) * prev + a * l1
}

/// Per (UE, cell) L1/L3 filter memory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementPipeline {
    samples: [f64; L1_SAMPLES],
    filled: usize,
    pub l1_output: Option<f64>,
    pub l3_output: Option<f64>,
}

impl MeasurementPipeline {
    /// Feeds one raw RSRP sample. Returns the new L3 value when this sample
    /// completes an L1 period.
    pub fn push_sample(&mut self, rsrp_dbm: f64, l3_coefficient: f64) -> Option<f64> {
        self.samples[self.filled] = rsrp_dbm;
        self.filled += 1;
        if self.filled < L1_SAMPLES {
            return None;
        }
        self.filled = 0;
        let l1 = l1_filter(&self.samples)?;
        self.l1_output = Some(l1);
        let l3 = match self.l3_output {
            Some(prev) => l3_filter(prev, l1, l3_coefficient),
            None => l1,
        };
        self.l3_output = Some(l3);
        Some(l3)
    }
}

/// Biased entry condition, strict inequality.
pub fn entry_condition(serving_rsrp: f64, serving_bias: f64, target_rsrp: f64, target_bias: f64, hysteresis_db: f64) -> bool {
    serving_rsrp + serving_bias < target_rsrp + target_bias + hysteresis_db
}

/// One target's view for a TTT step.
#[derive(Debug, Clone, Copy)]
pub struct TargetCondition {
    pub target: CellId,
    pub holds: bool,
    /// Target's biased RSRP, used to rank simultaneous expiries.
    pub biased_rsrp: f64,
}

/// Time-to-trigger timers, one per potential target cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverFsm {
    elapsed_ms: Vec<u64>,
}

impl HandoverFsm {
    pub fn new(cell_count: usize) -> Self {
        Self {
            elapsed_ms: vec![0; cell_count],
        }
    }

    pub fn elapsed_ms(&self, target: CellId) -> u64 {
        self.elapsed_ms[target.0]
    }

    pub fn is_idle(&self) -> bool {
        self.elapsed_ms.iter().all(|&e| e == 0)
    }

    pub fn reset(&mut self) {
        self.elapsed_ms.iter_mut().for_each(|e| *e = 0);
    }

    /// Advances every listed target's timer by `dt_ms` (or resets it when the
    /// condition fails). If any timer reaches `ttt_ms`, the expired target
    /// with the highest biased RSRP is returned and all timers reset.
    pub fn advance(&mut self, conditions: &[TargetCondition], dt_ms: u64, ttt_ms: u64) -> Option<CellId> {
        let mut winner: Option<(CellId, f64)> = None;
        for c in conditions {
            let e = &mut self.elapsed_ms[c.target.0];
            if c.holds {
                *e = (*e + dt_ms).min(ttt_ms);
                if *e >= ttt_ms && winner.is_none_or(|(_, best)| c.biased_rsrp > best) {
                    winner = Some((c.target, c.biased_rsrp));
                }
            } else {
                *e = 0;
            }
        }
        let (target, _) = winner?;
        self.reset();
        Some(target)
    }
}

/// A triggered handover waiting out the execution delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingHandover {
    pub source: CellId,
    pub target: CellId,
    pub trigger_ms: u64,
    pub execute_ms: u64,
}

/// Ring buffer of the UE's recent wideband SINR towards its serving cell.
#[derive(Debug, Clone)]
pub struct SinrHistory {
    buf: VecDeque<f64>,
    cap: usize,
}

impl SinrHistory {
    pub fn new(cap: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(cap.max(1)),
            cap: cap.max(1),
        }
    }

    pub fn push(&mut self, sinr_db: f64) {
        if self.buf.len() == self.cap {
            self.buf.pop_front();
        }
        self.buf.push_back(sinr_db);
    }

    /// The most recent `n` samples (fewer if not yet recorded), oldest first.
    pub fn last(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let skip = self.buf.len().saturating_sub(n);
        self.buf.iter().skip(skip).copied()
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverOutcome {
    Success,
    Failure,
}

/// Failure iff any wideband source-cell SINR in the window is below `qout_db`.
pub fn classify_handover(window_sinr_db: impl IntoIterator<Item = f64>, qout_db: f64) -> HandoverOutcome {
    if window_sinr_db.into_iter().any(|s| s < qout_db) {
        HandoverOutcome::Failure
    } else {
        HandoverOutcome::Success
    }
}

/// Ping-pong: the UE returns to the cell it left less than `window_ms` ago.
pub fn detect_ping_pong(previous: Option<HandoverRecord>, time_ms: u64, target: CellId, window_ms: u64) -> bool {
    match previous {
        Some(prev) => prev.source == target && time_ms.saturating_sub(prev.time_ms) < window_ms,
        None => false,
    }
}
