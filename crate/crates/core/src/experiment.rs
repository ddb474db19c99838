//! Sweep planning, parallel execution and result files.
//!
//! Every (sweep point, seed) pair becomes one simulation. Its outputs are
//! `<name>.json` (report), `<name>.cdf.csv` and optionally `<name>.kpilog`,
//! where `<name>` is `axis=value__...__seed=S`. `summary.csv` has one row per
//! simulation; `pooled.csv` merges the seeds of each sweep point.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::engine::run_simulation;
use crate::error::SimError;
use crate::kpi::KpiLog;
use crate::metrics::{per_ue_mean_rates, throughput_cdf, KpiReport};

/// Values of every sweepable parameter at one point (whether swept or not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub learner: String,
    pub pico_count: usize,
    pub ue_count: usize,
    pub ttt_ms: u64,
    /// Empty when UEs draw from the velocity set.
    pub velocity_kmh: Option<f64>,
}

impl PointParams {
    fn of(c: &RunConfig) -> Self {
        Self {
            learner: c.learning.learner.as_str().to_string(),
            pico_count: c.scenario.picos_per_sector,
            ue_count: c.scenario.ues_per_sector,
            ttt_ms: c.handover.ttt_ms,
            velocity_kmh: c.scenario.fixed_velocity_kmh,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Swept axes only, in plan order.
    pub labels: Vec<(String, String)>,
    pub seed: u64,
    pub config: RunConfig,
}

impl SweepPoint {
    /// Name without the seed; shared by all seeds of a point.
    pub fn group(&self) -> String {
        self.labels
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("__")
    }

    pub fn name(&self) -> String {
        let g = self.group();
        if g.is_empty() {
            format!("seed={}", self.seed)
        } else {
            format!("{g}__seed={}", self.seed)
        }
    }
}

/// Cross product of the sweep axes (learner, pico_count, ue_count, ttt_ms,
/// fixed_velocity_kmh, in that nesting order) times the seed list.
pub fn plan(config: &RunConfig) -> Vec<SweepPoint> {
    let base = {
        let mut b = config.effective();
        b.sweep = Default::default();
        b.seeds = Vec::new();
        b
    };
    let mut points: Vec<(Vec<(String, String)>, RunConfig)> = vec![(Vec::new(), base)];

    fn expand<T: Copy + ToString>(
        points: Vec<(Vec<(String, String)>, RunConfig)>,
        axis: &str,
        values: &[T],
        apply: impl Fn(&mut RunConfig, T),
    ) -> Vec<(Vec<(String, String)>, RunConfig)> {
        if values.is_empty() {
            return points;
        }
        let mut out = Vec::with_capacity(points.len() * values.len());
        for (labels, cfg) in points {
            for &v in values {
                let mut l = labels.clone();
                l.push((axis.to_string(), v.to_string()));
                let mut c = cfg.clone();
                apply(&mut c, v);
                out.push((l, c));
            }
        }
        out
    }

    let sw = &config.sweep;
    points = expand(points, "learner", &sw.learner, |c, v| {
        c.learning.learner = v;
        c.scheduler.scheduler_mode = config.scheduler.scheduler_mode;
        c.scheduler.history_transfer = config.scheduler.history_transfer;
        let eff = c.effective();
        c.scheduler = eff.scheduler;
    });
    points = expand(points, "pico_count", &sw.pico_count, |c, v| c.scenario.picos_per_sector = v);
    points = expand(points, "ue_count", &sw.ue_count, |c, v| c.scenario.ues_per_sector = v);
    points = expand(points, "ttt_ms", &sw.ttt_ms, |c, v| c.handover.ttt_ms = v);
    points = expand(points, "velocity_kmh", &sw.fixed_velocity_kmh, |c, v| {
        c.scenario.fixed_velocity_kmh = Some(v)
    });

    let seeds = config.seed_list();
    let mut out = Vec::with_capacity(points.len() * seeds.len());
    for (labels, cfg) in points {
        for &s in &seeds {
            let mut c = cfg.clone();
            c.seed = s;
            out.push(SweepPoint {
                labels: labels.clone(),
                seed: s,
                config: c,
            });
        }
    }
    out
}

/// Per-simulation JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: String,
    pub group: String,
    pub seed: u64,
    pub params: PointParams,
    #[serde(flatten)]
    pub report: KpiReport,
    pub ue_mean_throughput_bps: Vec<f64>,
}

/// One `summary.csv` row. The column set does not depend on the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: String,
    pub learner: String,
    pub pico_count: usize,
    pub ue_count: usize,
    pub ttt_ms: u64,
    pub velocity_kmh: Option<f64>,
    pub seed: u64,
    pub measured_ttis: usize,
    pub ues: usize,
    pub p5_throughput_bps: f64,
    pub p50_throughput_bps: f64,
    pub p95_throughput_bps: f64,
    pub mean_throughput_bps: f64,
    pub sum_rate_bps: f64,
    pub hof_probability: f64,
    pub pp_probability: f64,
    pub triggers: u64,
    pub successes: u64,
    pub hofs: u64,
    pub pps: u64,
}

impl SummaryRow {
    fn from_point(p: &PointReport) -> Self {
        let r = &p.report;
        Self {
            point: p.point.clone(),
            learner: p.params.learner.clone(),
            pico_count: p.params.pico_count,
            ue_count: p.params.ue_count,
            ttt_ms: p.params.ttt_ms,
            velocity_kmh: p.params.velocity_kmh,
            seed: p.seed,
            measured_ttis: r.measured_ttis,
            ues: r.ue_count,
            p5_throughput_bps: r.p5_throughput_bps,
            p50_throughput_bps: r.p50_throughput_bps,
            p95_throughput_bps: r.p95_throughput_bps,
            mean_throughput_bps: r.mean_throughput_bps,
            sum_rate_bps: r.sum_rate_bps,
            hof_probability: r.hof_probability,
            pp_probability: r.pp_probability,
            triggers: r.handover_counts.triggers,
            successes: r.handover_counts.successes,
            hofs: r.handover_counts.hofs,
            pps: r.handover_counts.pps,
        }
    }
}

/// Seeds of one sweep point merged: UEs pooled for the throughput
/// percentiles, handover counts summed before taking ratios, sum rate
/// averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRow {
    pub group: String,
    pub learner: String,
    pub pico_count: usize,
    pub ue_count: usize,
    pub ttt_ms: u64,
    pub velocity_kmh: Option<f64>,
    pub seeds: usize,
    pub p5_throughput_bps: f64,
    pub p50_throughput_bps: f64,
    pub p95_throughput_bps: f64,
    pub mean_throughput_bps: f64,
    pub sum_rate_bps: f64,
    pub hof_probability: f64,
    pub pp_probability: f64,
    pub successes: u64,
    pub hofs: u64,
    pub pps: u64,
}

pub fn pool(points: &[PointReport]) -> Vec<PooledRow> {
    let mut groups: BTreeMap<&str, Vec<&PointReport>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for p in points {
        let e = groups.entry(&p.group).or_default();
        if e.is_empty() {
            order.push(&p.group);
        }
        e.push(p);
    }
    order
        .into_iter()
        .map(|g| {
            let members = &groups[g];
            let ues: Vec<f64> = members.iter().flat_map(|p| p.ue_mean_throughput_bps.iter().copied()).collect();
            let cdf = throughput_cdf(&ues).ok();
            let pct = |q| cdf.as_ref().map_or(0.0, |c| c.percentile(q));
            let (succ, hofs, pps) = members.iter().fold((0, 0, 0), |(s, h, p), m| {
                let c = m.report.handover_counts;
                (s + c.successes, h + c.hofs, p + c.pps)
            });
            let first = members[0];
            PooledRow {
                group: g.to_string(),
                learner: first.params.learner.clone(),
                pico_count: first.params.pico_count,
                ue_count: first.params.ue_count,
                ttt_ms: first.params.ttt_ms,
                velocity_kmh: first.params.velocity_kmh,
                seeds: members.len(),
                p5_throughput_bps: pct(5.0),
                p50_throughput_bps: pct(50.0),
                p95_throughput_bps: pct(95.0),
                mean_throughput_bps: if ues.is_empty() { 0.0 } else { ues.iter().sum::<f64>() / ues.len() as f64 },
                sum_rate_bps: members.iter().map(|m| m.report.sum_rate_bps).sum::<f64>() / members.len() as f64,
                hof_probability: if succ + hofs == 0 { 0.0 } else { hofs as f64 / (succ + hofs) as f64 },
                pp_probability: if succ == 0 { 0.0 } else { pps as f64 / succ as f64 },
                successes: succ,
                hofs,
                pps,
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub points: Vec<PointReport>,
    pub failures: Vec<(String, String)>,
    pub total: usize,
}

impl ExperimentOutcome {
    pub fn pooled(&self) -> Vec<PooledRow> {
        pool(&self.points)
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SimError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| SimError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| SimError::io(path, e))
}

fn run_point(point: &SweepPoint, out_dir: Option<&Path>) -> Result<PointReport, SimError> {
    let out = run_simulation(&point.config)?;
    let params = PointParams::of(&point.config);
    let mut log = out.log;
    let ue_mean_throughput_bps = per_ue_mean_rates(&log, log.warmup_ms);
    let report = PointReport {
        point: point.name(),
        group: point.group(),
        seed: point.seed,
        params,
        report: out.report,
        ue_mean_throughput_bps,
    };
    if let Some(dir) = out_dir {
        let name = point.name();
        write_atomic(&dir.join(format!("{name}.json")), serde_json::to_string_pretty(&report)?.as_bytes())?;
        write_atomic(&dir.join(format!("{name}.cdf.csv")), report.report.cdf_csv().as_bytes())?;
        if point.config.engine.write_log {
            log.meta_json = serde_json::json!({
                "point": report.point,
                "group": report.group,
                "seed": report.seed,
                "params": report.params,
            })
            .to_string();
            let mut buf = Vec::new();
            log.write_to(&mut buf).map_err(|e| SimError::io(dir, e))?;
            write_atomic(&dir.join(format!("{name}.kpilog")), &buf)?;
        }
    }
    Ok(report)
}

/// Runs every planned point on `workers` threads. With `out_dir`, writes
/// the per-point files, the effective config, `summary.csv` and
/// `pooled.csv`. Results of points that succeeded are kept even when others
/// fail.
pub fn run_experiment(config: &RunConfig, out_dir: Option<&Path>, workers: usize) -> Result<ExperimentOutcome, SimError> {
    config.validate()?;
    let points = plan(config);
    for p in &points {
        p.config.validate()?;
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        write_atomic(&dir.join("effective_config.toml"), config.effective().to_toml_string().as_bytes())?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<PointReport, String>> = pool.install(|| {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|p| {
                log::info!("running {}", p.name());
                match catch_unwind(AssertUnwindSafe(|| run_point(p, out_dir))) {
                    Ok(Ok(r)) => Ok(r),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(panic) => Err(panic_message(panic)),
                }
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(msg) => {
                log::error!("{} failed: {msg}", p.name());
                failures.push((p.name(), msg));
            }
        }
    }
    if let Some(dir) = out_dir {
        write_tables(dir, &reports)?;
    }
    Ok(ExperimentOutcome {
        points: reports,
        failures,
        total: points.len(),
    })
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".to_string()
    }
}

pub fn summary_csv(points: &[PointReport]) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(SummaryRow::from_point(p))?;
    }
    if points.is_empty() {
        w.write_record(summary_header())?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| SimError::Csv(e.into_error().into()))?).expect("csv is utf-8"))
}

fn summary_header() -> [&'static str; 20] {
    [
        "point",
        "learner",
        "pico_count",
        "ue_count",
        "ttt_ms",
        "velocity_kmh",
        "seed",
        "measured_ttis",
        "ues",
        "p5_throughput_bps",
        "p50_throughput_bps",
        "p95_throughput_bps",
        "mean_throughput_bps",
        "sum_rate_bps",
        "hof_probability",
        "pp_probability",
        "triggers",
        "successes",
        "hofs",
        "pps",
    ]
}

pub fn pooled_csv(rows: &[PooledRow]) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| SimError::Csv(e.into_error().into()))?).expect("csv is utf-8"))
}

fn write_tables(dir: &Path, reports: &[PointReport]) -> Result<(), SimError> {
    write_atomic(&dir.join("summary.csv"), summary_csv(reports)?.as_bytes())?;
    write_atomic(&dir.join("pooled.csv"), pooled_csv(&pool(reports))?.as_bytes())
}

#[derive(Deserialize)]
struct LogMeta {
    point: String,
    group: String,
    seed: u64,
    params: PointParams,
}

/// Re-aggregates every `*.kpilog` in `dir`, rewriting the per-point JSON and
/// CDF files and both tables. Points are ordered by file name.
pub fn report_dir(dir: &Path) -> Result<Vec<PointReport>, SimError> {
    let mut logs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SimError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "kpilog"))
        .collect();
    logs.sort();
    let mut reports = Vec::with_capacity(logs.len());
    for path in logs {
        let log = KpiLog::load(&path)?;
        let meta: LogMeta = serde_json::from_str(&log.meta_json).map_err(|e| SimError::BadLog {
            path: path.clone(),
            reason: format!("metadata: {e}"),
        })?;
        let report = KpiReport::from_log(&log).map_err(|e| SimError::Metrics(e.to_string()))?;
        let p = PointReport {
            ue_mean_throughput_bps: per_ue_mean_rates(&log, log.warmup_ms),
            point: meta.point,
            group: meta.group,
            seed: meta.seed,
            params: meta.params,
            report,
        };
        write_atomic(&dir.join(format!("{}.json", p.point)), serde_json::to_string_pretty(&p)?.as_bytes())?;
        write_atomic(&dir.join(format!("{}.cdf.csv", p.point)), p.report.cdf_csv().as_bytes())?;
        reports.push(p);
    }
    write_tables(dir, &reports)?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::Learner;

    #[test]
    fn plan_is_cross_product_times_seeds() {
        let mut c = RunConfig::default();
        c.sweep.pico_count = vec![1, 2, 3];
        c.seeds = vec![1, 2, 3];
        let p = plan(&c);
        assert_eq!(p.len(), 9);
        assert_eq!(p[0].name(), "pico_count=1__seed=1");
        assert_eq!(p[8].name(), "pico_count=3__seed=3");
        assert_eq!(p[4].config.scenario.picos_per_sector, 2);
        assert_eq!(p[4].config.seed, 2);
    }

    #[test]
    fn learner_axis_resolves_scheduler() {
        let mut c = RunConfig::default();
        c.sweep.learner = vec![Learner::None, Learner::Mab];
        let p = plan(&c);
        assert_eq!(p[0].name(), "learner=none__seed=1");
        assert_eq!(
            p[0].config.scheduler.scheduler_mode,
            Some(crate::scheduler::SchedulerMode::ClassicalPf)
        );
        assert_eq!(
            p[1].config.scheduler.scheduler_mode,
            Some(crate::scheduler::SchedulerMode::ContextAware)
        );
        assert_eq!(p[1].config.scheduler.history_transfer, Some(true));
    }

    #[test]
    fn unswept_point_named_by_seed() {
        let p = plan(&RunConfig::default());
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].name(), "seed=1");
        assert_eq!(p[0].group(), "");
    }

    #[test]
    fn summary_header_matches_rows() {
        let empty = summary_csv(&[]).unwrap();
        assert_eq!(empty.trim(), summary_header().join(","));
    }
}
