//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::f64::consts::TAU;

use hetnet_core::kpi::EventKind;
use hetnet_core::scenario::{MacroSite, PicoSite, Point, Topology, UeState};
use hetnet_core::{RunConfig, UeId, World};

pub const PICO_X: f64 = 400.0;
pub const START_X: f64 = 300.0;
pub const SPEED_KMH: f64 = 60.0;
pub const PICO_REB_DB: f64 = 6.0;

/// One three-sector macro site at the origin (sector 0 pointing along +x),
/// one pico on that boresight, one UE driving straight at the pico.
/// No shadowing, no fading, fixed REBs.
pub fn crossing_world(ttt_ms: u64, hysteresis_db: f64) -> World {
    let mut cfg = RunConfig::default();
    cfg.radio.fading = false;
    cfg.radio.macro_shadowing_std_db = 0.0;
    cfg.radio.pico_shadowing_std_db = 0.0;
    cfg.learning.fixed_pico_reb_db = PICO_REB_DB;
    cfg.handover.ttt_ms = ttt_ms;
    cfg.handover.hysteresis_db = hysteresis_db;
    cfg.engine.warmup_ms = 0;

    let site = MacroSite {
        position: Point::new(0.0, 0.0),
        sector_boresights: [0.0, TAU / 3.0, 2.0 * TAU / 3.0],
    };
    let pico = PicoSite {
        position: Point::new(PICO_X, 0.0),
        site: 0,
        sector: 0,
    };
    let topo = Topology::new(vec![site], vec![pico], 60.0, 500.0, 2000.0);
    let ue = UeState::new(
        UeId(0),
        Point::new(START_X, 0.0),
        SPEED_KMH,
        0.0,
        topo.cells().len(),
        cfg.handover.sinr_window_len(),
    );
    World::from_parts(&cfg, topo, vec![ue])
}

/// Runs until the first handover trigger; returns (time, target cell).
pub fn first_trigger(world: &mut World, limit_ms: u64) -> Option<(u64, usize)> {
    while world.clock_ms < limit_ms {
        world.run_tti();
        if let Some(ev) = world.log.events.iter().find(|e| e.kind == EventKind::Trigger) {
            return Some((ev.time_ms, ev.target.0));
        }
    }
    None
}

/// Closed-form RSRP (dBm per RB) of the boresight macro sector and the pico
/// at distance `x` metres along the axis. 46/30 dBm over 50 RBs, 14/5 dBi,
/// 128.1 + 37.6 log10(d km) and 140.7 + 36.7 log10(d km).
pub fn oracle_rsrp(x: f64) -> (f64, f64) {
    let per_rb = 10.0 * 50f64.log10();
    let macro_ = 46.0 - per_rb + 14.0 - (128.1 + 37.6 * (x / 1000.0).log10());
    let pico = 30.0 - per_rb + 5.0 - (140.7 + 36.7 * ((PICO_X - x) / 1000.0).log10());
    (macro_, pico)
}

/// Trigger time predicted from the geometry alone.
///
/// Raw samples every 40 ms at the UE's position after that TTI's move; L1 is
/// the mean of 5 samples; L3 starts at the first L1 value and then mixes
/// with coefficient 0.5. `t_cross` is the first L3 update at which the biased
/// entry condition holds. The condition then holds on every TTI, so the
/// trigger fires on the TTT-th consecutive TTI, `t_cross + ttt - 1`.
pub fn oracle_trigger(ttt_ms: u64, hysteresis_db: f64) -> u64 {
    let v = SPEED_KMH / 3.6;
    let (mut buf_m, mut buf_p) = (Vec::new(), Vec::new());
    let (mut l3_m, mut l3_p): (Option<f64>, Option<f64>) = (None, None);
    let mut t = 0u64;
    loop {
        t += 40;
        let x = START_X + v * t as f64 / 1000.0;
        assert!(x < PICO_X - 10.0, "UE reached the pico before any crossing");
        let (m, p) = oracle_rsrp(x);
        buf_m.push(m);
        buf_p.push(p);
        if buf_m.len() < 5 {
            continue;
        }
        let l1_m = buf_m.iter().sum::<f64>() / 5.0;
        let l1_p = buf_p.iter().sum::<f64>() / 5.0;
        buf_m.clear();
        buf_p.clear();
        l3_m = Some(l3_m.map_or(l1_m, |prev| 0.5 * prev + 0.5 * l1_m));
        l3_p = Some(l3_p.map_or(l1_p, |prev| 0.5 * prev + 0.5 * l1_p));
        if l3_m.unwrap() < l3_p.unwrap() + PICO_REB_DB + hysteresis_db {
            return t + ttt_ms - 1;
        }
    }
}
