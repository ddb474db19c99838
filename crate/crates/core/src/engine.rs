//! The per-TTI simulation loop.
//!
//! Each [`World::run_tti`] executes, in this order:
//!
//! 1. mobility step
//! 2. channel update, serving-cell SINR, RSRP measurement
//! 3. learning-epoch boundary (agents pick the REB for the next epoch)
//! 4. handover evaluation and execution
//! 5. per-cell scheduling
//! 6. average-rate updates
//! 7. KPI append

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::SimError;
use crate::handover::{classify_handover, detect_ping_pong, entry_condition, HandoverOutcome, HofRecovery, PendingHandover, TargetCondition};
use crate::kpi::{EventKind, HandoverEvent, KpiLog};
use crate::learning::{AgentSnapshot, CellAgent, EpochFeedback};
use crate::metrics::KpiReport;
use crate::radio::{fading_correlation, rb_rate_bps, wideband_sinr_db, ChannelState};
use crate::rng::{stream, SimRng, Stream};
use crate::scenario::{build_topology, drop_ues, HandoverRecord, Topology, UeState};
use crate::scheduler::{cell_load, schedule_tti, transfer_history, update_avg_rate, CellAllocation, CellUe, SchedulerMode};
use crate::{CellId, UeId, TTI_MS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Leading simulated time excluded from every KPI.
    pub warmup_ms: u64,
    /// Keep the binary KPI log next to the report.
    pub write_log: bool,
    /// Record per-epoch agent snapshots.
    pub diagnostics: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            warmup_ms: 1000,
            write_log: true,
            diagnostics: false,
        }
    }
}

pub struct World {
    pub config: RunConfig,
    pub clock_ms: u64,
    pub topology: Topology,
    pub ues: Vec<UeState>,
    pub channel: ChannelState,
    pub agents: Vec<CellAgent>,
    pub allocation: Vec<CellAllocation>,
    pub log: KpiLog,
    pub diagnostics: Vec<AgentSnapshot>,
    fading_rng: SimRng,
    learning_rng: SimRng,
    mode: SchedulerMode,
    history_transfer: bool,
    noise_mw: f64,
    rb_sinr: Vec<f64>,
    rb_rate: Vec<f64>,
    rho: Vec<f64>,
    cell_ues: Vec<Vec<usize>>,
    ue_rates: Vec<f64>,
    cell_loads: Vec<f64>,
}

impl World {
    /// Builds the topology, drops UEs and associates them by biased RSRP.
    pub fn new(config: &RunConfig) -> Result<Self, SimError> {
        let mut topo_rng = stream(config.seed, Stream::Topology);
        let topology = build_topology(&config.scenario, &mut topo_rng)?;
        let mut drop_rng = stream(config.seed, Stream::Drop);
        let ues = drop_ues(
            &topology,
            &config.scenario,
            topology.cells().len(),
            config.handover.sinr_window_len(),
            &mut drop_rng,
        );
        Ok(Self::from_parts(config, topology, ues))
    }

    /// Assembles a world around a given topology and UE population.
    pub fn from_parts(config: &RunConfig, topology: Topology, mut ues: Vec<UeState>) -> Self {
        let cells = topology.cells().len();
        let rb = config.radio.rb_count;
        let mut shadow_rng = stream(config.seed, Stream::Shadowing);
        let mut fading_rng = stream(config.seed, Stream::Fading);
        let mut learning_rng = stream(config.seed, Stream::Learning);
        let mut channel = ChannelState::new(ues.len(), topology.cells(), &config.radio, &mut shadow_rng, &mut fading_rng);
        for (i, ue) in ues.iter().enumerate() {
            channel.update_geometry(i, &ue.position, topology.cells(), &config.radio);
        }
        let agents: Vec<CellAgent> = topology
            .cells()
            .iter()
            .map(|c| CellAgent::new(c.tier, &config.learning, &mut learning_rng))
            .collect();
        for (i, ue) in ues.iter_mut().enumerate() {
            ue.serving_cell = best_biased_cell(channel.rsrp_row(i), &agents);
        }
        let rho = ues
            .iter()
            .map(|u| {
                if config.radio.fading {
                    fading_correlation(u.speed_kmh, config.radio.carrier_hz, TTI_MS as f64)
                } else {
                    1.0
                }
            })
            .collect();
        let mut log = KpiLog::new(ues.len(), cells, config.engine.warmup_ms);
        log.meta_json = serde_json::json!({ "seed": config.seed }).to_string();
        let n = ues.len();
        Self {
            mode: config.scheduler_mode(),
            history_transfer: config.history_transfer(),
            noise_mw: config.radio.noise_per_rb_mw(),
            config: config.clone(),
            clock_ms: 0,
            topology,
            ues,
            channel,
            agents,
            allocation: vec![CellAllocation::empty(rb); cells],
            log,
            diagnostics: Vec::new(),
            fading_rng,
            learning_rng,
            rb_sinr: vec![0.0; n * rb],
            rb_rate: vec![0.0; n * rb],
            rho,
            cell_ues: vec![Vec::new(); cells],
            ue_rates: vec![0.0; n],
            cell_loads: vec![0.0; cells],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.topology.cells().len()
    }

    /// Per-RB achievable rates of `ue` on its serving cell this TTI.
    pub fn ue_rb_rates(&self, ue: usize) -> &[f64] {
        let rb = self.config.radio.rb_count;
        &self.rb_rate[ue * rb..(ue + 1) * rb]
    }

    pub fn serving_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.cell_count()];
        for u in &self.ues {
            n[u.serving_cell.0] += 1;
        }
        n
    }

    pub fn run(&mut self, ttis: u64) {
        for _ in 0..ttis {
            self.run_tti();
        }
    }

    pub fn run_tti(&mut self) {
        self.clock_ms += TTI_MS;
        let t = self.clock_ms;

        // 1. mobility
        let region = self.topology.region;
        for ue in &mut self.ues {
            ue.step(TTI_MS as f64, &region);
        }

        // 2. channel and measurements
        let measure = t % self.config.handover.measurement_period_ms == 0;
        let a = self.config.handover.l3_coefficient;
        for i in 0..self.ues.len() {
            self.channel
                .update_geometry(i, &self.ues[i].position, self.topology.cells(), &self.config.radio);
            self.channel.advance_fading(i, self.rho[i], &mut self.fading_rng);
            let wb = self.refresh_link(i);
            let ue = &mut self.ues[i];
            ue.sinr_history.push(wb);
            if measure {
                for (c, m) in ue.measurement.iter_mut().enumerate() {
                    m.push_sample(self.channel.rsrp(i, c), a);
                }
            }
        }

        // 3. learning epoch boundary
        let epoch = self.config.learning.learning_epoch_ttis;
        if t > 1 && (t - 1) % epoch == 0 {
            self.close_epoch(t);
        }

        // 4. handover
        for i in 0..self.ues.len() {
            if self.handover_step(i, t) {
                self.refresh_link(i);
            }
        }

        // 5. scheduling
        for list in &mut self.cell_ues {
            list.clear();
        }
        for (i, u) in self.ues.iter().enumerate() {
            self.cell_ues[u.serving_cell.0].push(i);
        }
        let rb = self.config.radio.rb_count;
        let sched = &self.config.scheduler;
        for c in 0..self.cell_count() {
            let members: Vec<CellUe<'_>> = self.cell_ues[c]
                .iter()
                .map(|&i| CellUe {
                    ue: UeId(i),
                    rb_rates_bps: &self.rb_rate[i * rb..(i + 1) * rb],
                    avg_rate_bps: self.ues[i].avg_rate_bps,
                    speed_kmh: self.ues[i].speed_kmh,
                })
                .collect();
            self.allocation[c] = schedule_tti(&members, rb, self.mode, sched.epsilon_tie, sched.pf_floor_bps);
            let per_ue: Vec<&[f64]> = members.iter().map(|m| m.rb_rates_bps).collect();
            self.agents[c].u_max.observe(&per_ue);
        }

        // 6. average rates
        self.ue_rates.iter_mut().for_each(|r| *r = 0.0);
        for alloc in &self.allocation {
            for (owner, r) in alloc.rb_owner.iter().zip(&alloc.rb_rate_bps) {
                if let Some(u) = owner {
                    self.ue_rates[u.0] += r;
                }
            }
        }
        let window = sched.history_window_ms;
        let ts = TTI_MS as f64;
        for (ue, &inst) in self.ues.iter_mut().zip(&self.ue_rates) {
            ue.inst_rate_bps = inst;
            ue.avg_rate_bps = if ue.history_transfer_pending {
                ue.history_transfer_pending = false;
                transfer_history(ue.avg_rate_bps, inst, window, ts)
            } else {
                update_avg_rate(ue.avg_rate_bps, inst, window, ts)
            };
        }

        // 7. KPIs
        for (c, alloc) in self.allocation.iter().enumerate() {
            self.cell_loads[c] = cell_load(alloc);
            self.agents[c].observe_tti(self.cell_loads[c]);
        }
        self.log.push_tti(t, &self.ue_rates, &self.cell_loads);
    }

    /// Recomputes serving-cell per-RB SINR and rates of `ue`; returns the
    /// wideband SINR in dB.
    fn refresh_link(&mut self, i: usize) -> f64 {
        let rb = self.config.radio.rb_count;
        let serving = self.ues[i].serving_cell.0;
        let sinr = &mut self.rb_sinr[i * rb..(i + 1) * rb];
        self.channel.rb_sinrs(i, serving, self.noise_mw, sinr);
        let bw = self.config.radio.rb_bandwidth_hz;
        for (r, &s) in self.rb_rate[i * rb..(i + 1) * rb].iter_mut().zip(sinr.iter()) {
            *r = rb_rate_bps(bw, s);
        }
        wideband_sinr_db(sinr)
    }

    fn close_epoch(&mut self, t: u64) {
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); self.cell_count()];
        for u in &self.ues {
            members[u.serving_cell.0].push(u.avg_rate_bps);
        }
        for (c, agent) in self.agents.iter_mut().enumerate() {
            let fb = EpochFeedback {
                mean_load_bps: agent.epoch_mean_load(),
                ue_avg_rates_bps: &members[c],
            };
            let snap = agent.end_epoch(fb, &self.config.learning, t, c, &mut self.learning_rng);
            if let (Some(s), true) = (snap, self.config.engine.diagnostics) {
                self.diagnostics.push(s);
            }
        }
    }

    /// Runs TTT evaluation or pending execution for one UE. Returns true when
    /// the serving cell changed.
    fn handover_step(&mut self, i: usize, t: u64) -> bool {
        let hcfg = &self.config.handover;
        let ue = &mut self.ues[i];
        if let Some(p) = ue.pending_handover {
            if t < p.execute_ms {
                return false;
            }
            ue.pending_handover = None;
            let outcome = classify_handover(ue.sinr_history.last(hcfg.sinr_window_len()), hcfg.qout_db);
            let event = |kind| HandoverEvent {
                time_ms: t,
                trigger_ms: p.trigger_ms,
                ue: UeId(i),
                source: p.source,
                target: p.target,
                kind,
            };
            return match outcome {
                HandoverOutcome::Failure => {
                    self.log.push_event(event(EventKind::Hof));
                    match hcfg.hof_recovery {
                        HofRecovery::Stay => false,
                        HofRecovery::Reestablish => {
                            ue.serving_cell = p.target;
                            ue.avg_rate_bps = 0.0;
                            ue.history_transfer_pending = false;
                            ue.ttt.reset();
                            true
                        }
                    }
                }
                HandoverOutcome::Success => {
                    self.log.push_event(event(EventKind::Success));
                    if detect_ping_pong(ue.last_handover, t, p.target, hcfg.pp_window_ms) {
                        self.log.push_event(event(EventKind::PingPong));
                    }
                    ue.last_handover = Some(HandoverRecord {
                        time_ms: t,
                        source: p.source,
                    });
                    ue.serving_cell = p.target;
                    if self.history_transfer {
                        ue.history_transfer_pending = true;
                    } else {
                        ue.avg_rate_bps = 0.0;
                    }
                    ue.ttt.reset();
                    true
                }
            };
        }

        let serving = ue.serving_cell.0;
        let Some(serving_l3) = ue.measurement[serving].l3_output else {
            return false;
        };
        let serving_bias = self.agents[serving].reb_db();
        let conds: Vec<TargetCondition> = ue
            .measurement
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != serving)
            .filter_map(|(c, m)| {
                let l3 = m.l3_output?;
                let bias = self.agents[c].reb_db();
                Some(TargetCondition {
                    target: CellId(c),
                    holds: entry_condition(serving_l3, serving_bias, l3, bias, hcfg.hysteresis_db),
                    biased_rsrp: l3 + bias,
                })
            })
            .collect();
        if let Some(target) = ue.ttt.advance(&conds, TTI_MS, hcfg.ttt_ms) {
            ue.pending_handover = Some(PendingHandover {
                source: ue.serving_cell,
                target,
                trigger_ms: t,
                execute_ms: t + hcfg.ho_execution_delay_ms,
            });
            self.log.push_event(HandoverEvent {
                time_ms: t,
                trigger_ms: t,
                ue: UeId(i),
                source: ue.serving_cell,
                target,
                kind: EventKind::Trigger,
            });
        }
        false
    }
}

/// Cell maximising RSRP + REB; lowest id on ties.
fn best_biased_cell(rsrp: &[f64], agents: &[CellAgent]) -> CellId {
    let mut best = 0;
    for c in 1..rsrp.len() {
        if rsrp[c] + agents[c].reb_db() > rsrp[best] + agents[best].reb_db() {
            best = c;
        }
    }
    CellId(best)
}

pub struct SimulationOutput {
    pub report: KpiReport,
    pub log: KpiLog,
    pub diagnostics: Vec<AgentSnapshot>,
}

/// Runs one configuration (its `seed`, no sweep) to completion.
pub fn run_simulation(config: &RunConfig) -> Result<SimulationOutput, SimError> {
    config.validate()?;
    let mut world = World::new(config)?;
    world.run(config.duration_ms / TTI_MS);
    let report = KpiReport::from_log(&world.log).map_err(|e| SimError::Metrics(e.to_string()))?;
    Ok(SimulationOutput {
        report,
        log: world.log,
        diagnostics: world.diagnostics,
    })
}
