//! Python bindings: `import hetnet`.
//!
//! Configs are passed as TOML text (the same format the CLI reads); reports
//! and events come back as plain dicts and lists.

use hetnet_core::config::{parse_config_str, RunConfig};
use hetnet_core::engine::World;
use hetnet_core::handover;
use hetnet_core::learning::{LearningRate, MabState, SatisfactionState};
use hetnet_core::radio::RadioConfig;
use hetnet_core::rng::{stream, SimRng, Stream};
use hetnet_core::{scheduler, KpiReport, Tier};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn parse(toml: Option<&str>) -> PyResult<RunConfig> {
    match toml {
        None => Ok(RunConfig::default()),
        Some(src) => parse_config_str(src)
            .map(|(c, _)| c)
            .map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn tier(name: &str) -> PyResult<Tier> {
    match name {
        "macro" => Ok(Tier::Macro),
        "pico" => Ok(Tier::Pico),
        other => Err(PyValueError::new_err(format!("unknown tier `{other}` (macro or pico)"))),
    }
}

/// A steppable simulation world.
#[pyclass(module = "hetnet")]
struct Simulation {
    world: World,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (config_toml=None))]
    fn new(config_toml: Option<&str>) -> PyResult<Self> {
        let cfg = parse(config_toml)?;
        let world = World::new(&cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { world })
    }

    /// Advance `ttis` TTIs (1 ms each).
    #[pyo3(signature = (ttis=1))]
    fn step(&mut self, py: Python<'_>, ttis: u64) {
        let world = &mut self.world;
        py.detach(|| world.run(ttis));
    }

    #[getter]
    fn clock_ms(&self) -> u64 {
        self.world.clock_ms
    }

    #[getter]
    fn ue_count(&self) -> usize {
        self.world.ues.len()
    }

    #[getter]
    fn cell_count(&self) -> usize {
        self.world.cell_count()
    }

    fn serving_cells(&self) -> Vec<usize> {
        self.world.ues.iter().map(|u| u.serving_cell.0).collect()
    }

    fn positions(&self) -> Vec<(f64, f64)> {
        self.world.ues.iter().map(|u| (u.position.x, u.position.y)).collect()
    }

    fn speeds_kmh(&self) -> Vec<f64> {
        self.world.ues.iter().map(|u| u.speed_kmh).collect()
    }

    fn avg_rates_bps(&self) -> Vec<f64> {
        self.world.ues.iter().map(|u| u.avg_rate_bps).collect()
    }

    fn inst_rates_bps(&self) -> Vec<f64> {
        self.world.ues.iter().map(|u| u.inst_rate_bps).collect()
    }

    fn rebs_db(&self) -> Vec<f64> {
        self.world.agents.iter().map(|a| a.reb_db()).collect()
    }

    /// `(x, y, tier)` per cell, indexed by cell id.
    fn cells(&self) -> Vec<(f64, f64, &'static str)> {
        self.world
            .topology
            .cells()
            .iter()
            .map(|c| {
                let t = match c.tier {
                    Tier::Macro => "macro",
                    Tier::Pico => "pico",
                };
                (c.position.x, c.position.y, t)
            })
            .collect()
    }

    /// Handover events logged so far, as dicts.
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.world.log.events)
    }

    /// KPI report over everything logged after the warm-up.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = KpiReport::from_log(&self.world.log).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &r)
    }
}

/// Run one configuration to completion and return its KPI report.
#[pyfunction]
#[pyo3(signature = (config_toml=None))]
fn run_simulation<'py>(py: Python<'py>, config_toml: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse(config_toml)?;
    let out = py
        .detach(|| hetnet_core::run_simulation(&cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &out.report)
}

/// Default configuration with every key spelled out, as TOML.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().effective().to_toml_string()
}

#[pyfunction]
fn path_loss_db(tier_name: &str, distance_m: f64) -> PyResult<f64> {
    Ok(RadioConfig::default().path_loss_db(tier(tier_name)?, distance_m))
}

#[pyfunction]
#[pyo3(signature = (sinr_linear, rb_bandwidth_hz=180e3))]
fn rb_rate_bps(sinr_linear: f64, rb_bandwidth_hz: f64) -> f64 {
    hetnet_core::radio::rb_rate_bps(rb_bandwidth_hz, sinr_linear)
}

#[pyfunction]
#[pyo3(signature = (serving_rsrp, serving_bias, target_rsrp, target_bias, hysteresis_db=0.0))]
fn entry_condition(serving_rsrp: f64, serving_bias: f64, target_rsrp: f64, target_bias: f64, hysteresis_db: f64) -> bool {
    handover::entry_condition(serving_rsrp, serving_bias, target_rsrp, target_bias, hysteresis_db)
}

#[pyfunction]
#[pyo3(signature = (source_avg_bps, first_target_inst_bps, window_ms=100.0, sample_ms=1.0))]
fn transfer_history(source_avg_bps: f64, first_target_inst_bps: f64, window_ms: f64, sample_ms: f64) -> f64 {
    scheduler::transfer_history(source_avg_bps, first_target_inst_bps, window_ms, sample_ms)
}

/// UCB bandit over `actions` arms.
#[pyclass(module = "hetnet")]
struct MabAgent {
    state: MabState,
}

#[pymethods]
impl MabAgent {
    #[new]
    #[pyo3(signature = (actions, seed=1))]
    fn new(actions: usize, seed: u64) -> PyResult<Self> {
        if actions == 0 {
            return Err(PyValueError::new_err("need at least one action"));
        }
        let mut rng = stream(seed, Stream::Learning);
        Ok(Self {
            state: MabState::new(actions, &mut rng),
        })
    }

    fn select(&self) -> usize {
        self.state.select()
    }

    /// Credit `reward` (>= 0) to `action`.
    fn update(&mut self, action: usize, reward: f64) -> PyResult<()> {
        if action >= self.state.counts().len() {
            return Err(PyValueError::new_err("action out of range"));
        }
        if !(reward >= 0.0) {
            return Err(PyValueError::new_err("reward must be >= 0"));
        }
        self.state.update(action, reward);
        Ok(())
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.state.counts().to_vec()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.state.means().to_vec()
    }

    fn decision_values(&self) -> Vec<f64> {
        self.state.decision_values()
    }
}

/// Satisfaction-driven reward-inaction automaton.
#[pyclass(module = "hetnet")]
struct SatisfactionAgent {
    state: SatisfactionState,
    rng: SimRng,
}

#[pymethods]
impl SatisfactionAgent {
    #[new]
    #[pyo3(signature = (actions, seed=1, lr_slope=0.1, lr_offset=0.001))]
    fn new(actions: usize, seed: u64, lr_slope: f64, lr_offset: f64) -> PyResult<Self> {
        if actions == 0 {
            return Err(PyValueError::new_err("need at least one action"));
        }
        let mut rng = stream(seed, Stream::Learning);
        let rate = LearningRate {
            slope: lr_slope,
            offset: lr_offset,
        };
        let state = SatisfactionState::new(actions, rate, &mut rng);
        Ok(Self { state, rng })
    }

    /// One learning iteration; `b` is the reward scale in [0, 1]. Returns
    /// the action to play next.
    fn step(&mut self, satisfied: bool, b: f64) -> usize {
        if satisfied {
            self.state.current()
        } else {
            self.state.step_with_scale(b, &mut self.rng)
        }
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.state.probs().to_vec()
    }

    #[getter]
    fn current(&self) -> usize {
        self.state.current()
    }
}

#[pymodule]
fn hetnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulation>()?;
    m.add_class::<MabAgent>()?;
    m.add_class::<SatisfactionAgent>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(rb_rate_bps, m)?)?;
    m.add_function(wrap_pyfunction!(entry_condition, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_history, m)?)?;
    Ok(())
}
