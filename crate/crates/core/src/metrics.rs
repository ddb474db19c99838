//! KPI aggregation over a completed [`KpiLog`].
//!
//! Everything here is a pure function of the log: aggregating the same log
//! twice yields bit-identical reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kpi::{EventKind, KpiLog};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("throughput CDF needs at least one UE")]
    EmptyInput,
}

/// Empirical CDF with linear interpolation between order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    sorted: Vec<f64>,
}

impl Cdf {
    pub fn new(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Value at percentile `p` ∈ [0, 100], rank `p/100·(n-1)` interpolated.
    pub fn percentile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let pos = (p.clamp(0.0, 100.0) / 100.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.sorted[lo] + (self.sorted[hi] - self.sorted[lo]) * frac
    }

    /// Curve sampled at every integer percentile 0..=100.
    pub fn points(&self) -> Vec<CdfPoint> {
        (0..=100)
            .map(|p| CdfPoint {
                percentile: p as f64,
                throughput_bps: self.percentile(p as f64),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub percentile: f64,
    pub throughput_bps: f64,
}

/// Throughput CDF over per-UE mean rates.
pub fn throughput_cdf(per_ue_mean_rates: &[f64]) -> Result<Cdf, MetricsError> {
    Cdf::new(per_ue_mean_rates)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverCounts {
    pub triggers: u64,
    pub successes: u64,
    pub hofs: u64,
    pub pps: u64,
}

impl HandoverCounts {
    /// Counts handovers whose TTT expired at or after `from_ms`. Triggers
    /// still executing when the log ends are left out so that
    /// `successes + hofs == triggers` holds exactly.
    pub fn from_log(log: &KpiLog, from_ms: u64) -> Self {
        let mut c = HandoverCounts::default();
        for e in log.events.iter().filter(|e| e.trigger_ms >= from_ms) {
            match e.kind {
                EventKind::Trigger => {}
                EventKind::Success => c.successes += 1,
                EventKind::Hof => c.hofs += 1,
                EventKind::PingPong => c.pps += 1,
            }
        }
        c.triggers = c.successes + c.hofs;
        c
    }
}

/// `hofs / (hofs + successes)`, 0 without handover activity.
pub fn hof_probability(c: &HandoverCounts) -> f64 {
    let attempts = c.hofs + c.successes;
    if attempts == 0 {
        0.0
    } else {
        c.hofs as f64 / attempts as f64
    }
}

/// `pps / successes`, 0 without successes.
pub fn pp_probability(c: &HandoverCounts) -> f64 {
    if c.successes == 0 {
        0.0
    } else {
        c.pps as f64 / c.successes as f64
    }
}

/// Time-average of the summed UE rates over TTIs at or after `from_ms`.
pub fn sum_rate(log: &KpiLog, from_ms: u64) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for i in log.ttis_from(from_ms) {
        total += log.ue_rates(i).iter().sum::<f64>();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Time-averaged load of each cell over TTIs at or after `from_ms`.
pub fn mean_cell_loads(log: &KpiLog, from_ms: u64) -> Vec<f64> {
    let mut acc = vec![0.0; log.cell_count];
    let mut n = 0usize;
    for i in log.ttis_from(from_ms) {
        for (a, l) in acc.iter_mut().zip(log.cell_loads(i)) {
            *a += l;
        }
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

/// Mean served rate of every UE over TTIs at or after `from_ms`.
pub fn per_ue_mean_rates(log: &KpiLog, from_ms: u64) -> Vec<f64> {
    let mut acc = vec![0.0; log.ue_count];
    let mut n = 0usize;
    for i in log.ttis_from(from_ms) {
        for (a, r) in acc.iter_mut().zip(log.ue_rates(i)) {
            *a += r;
        }
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub schema: u32,
    pub measured_ttis: usize,
    pub ue_count: usize,
    pub ue_throughput_cdf: Vec<CdfPoint>,
    /// Cell-edge (5th percentile) UE throughput.
    pub p5_throughput_bps: f64,
    /// Median UE throughput.
    pub p50_throughput_bps: f64,
    /// Cell-centre (95th percentile) UE throughput.
    pub p95_throughput_bps: f64,
    pub mean_throughput_bps: f64,
    pub sum_rate_bps: f64,
    pub hof_probability: f64,
    pub pp_probability: f64,
    pub handover_counts: HandoverCounts,
    pub cell_load_bps: Vec<f64>,
}

impl KpiReport {
    /// Aggregates everything at or after the log's warm-up boundary.
    pub fn from_log(log: &KpiLog) -> Result<Self, MetricsError> {
        let from = log.warmup_ms;
        let per_ue = per_ue_mean_rates(log, from);
        let cdf = throughput_cdf(&per_ue)?;
        let counts = HandoverCounts::from_log(log, from);
        Ok(Self {
            schema: REPORT_SCHEMA,
            measured_ttis: log.ttis_from(from).count(),
            ue_count: log.ue_count,
            ue_throughput_cdf: cdf.points(),
            p5_throughput_bps: cdf.percentile(5.0),
            p50_throughput_bps: cdf.percentile(50.0),
            p95_throughput_bps: cdf.percentile(95.0),
            mean_throughput_bps: per_ue.iter().sum::<f64>() / per_ue.len() as f64,
            sum_rate_bps: sum_rate(log, from),
            hof_probability: hof_probability(&counts),
            pp_probability: pp_probability(&counts),
            handover_counts: counts,
            cell_load_bps: mean_cell_loads(log, from),
        })
    }

    /// `percentile,throughput_bps` rows.
    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("percentile,throughput_bps\n");
        for p in &self.ue_throughput_cdf {
            s.push_str(&format!("{},{}\n", p.percentile, p.throughput_bps));
        }
        s
    }
}
