//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Exact criteria (1-6, 10)
//! fail the target on FAIL. The statistical trend criteria (7-9) report
//! their measurements and verdict without failing the build.
//!
//!     cargo test -p hetnet-core --test acceptance

mod common;

use std::path::PathBuf;
use std::time::Instant;

use hetnet_core::config::parse_config;
use hetnet_core::experiment::{run_experiment, PointReport};
use hetnet_core::learning::{reward_inaction_update, Learner, LearningRate, MabState, SatisfactionState};
use hetnet_core::scheduler::{schedule_tti, transfer_history, CellUe, SchedulerMode};
use hetnet_core::{RunConfig, UeId, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: u32,
    pass: bool,
    hard: bool,
    detail: String,
    secs: f64,
}

fn preset(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name);
    parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).0
}

fn c1_rb_exclusivity() -> (bool, String) {
    let mut cfg = RunConfig::default();
    cfg.scenario.picos_per_sector = 0;
    cfg.scenario.ues_per_sector = 10;
    let mut w = World::new(&cfg).expect("world");
    assert_eq!((w.cell_count(), w.ues.len()), (3, 30));
    let mut violations = 0u64;
    for _ in 0..10_000 {
        w.run_tti();
        let counts = w.serving_counts();
        let mut seen = vec![0u32; w.ues.len()];
        for (c, alloc) in w.allocation.iter().enumerate() {
            for owner in &alloc.rb_owner {
                match owner {
                    Some(u) if w.ues[u.0].serving_cell.0 == c => seen[u.0] += 1,
                    Some(_) => violations += 1,
                    None if counts[c] > 0 => violations += 1,
                    None => {}
                }
            }
        }
        let assigned: u32 = seen.iter().sum();
        let expected: usize = counts.iter().filter(|&&n| n > 0).count() * cfg.radio.rb_count;
        if assigned as usize != expected {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} violations over 10000 TTIs"))
}

fn c2_ucb() -> (bool, String) {
    let p = [0.9, 0.5, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mab = MabState::new(3, &mut rng);
    let mut regret = Vec::with_capacity(10_000);
    let mut acc = 0.0;
    for _ in 0..10_000 {
        let a = mab.select();
        let r = if rng.random::<f64>() < p[a] { 1.0 } else { 0.0 };
        mab.update(a, r);
        acc += p[0] - p[a];
        regret.push(acc);
    }
    let share = mab.counts()[0] as f64 / 10_000.0;
    let (r5, r10) = (regret[4_999], regret[9_999]);
    let pass = share >= 0.85 && r10 - r5 < 0.5 * r5;
    (pass, format!("best-arm share {share:.4}, regret(5k) {r5:.1}, regret(10k) {r10:.1}"))
}

fn c3_satisfaction() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut probs = vec![1.0 / 7.0; 7];
    for _ in 0..1_000_000 {
        if rng.random::<f64>() < 0.001 {
            let n = rng.random_range(1..=7);
            probs = vec![1.0 / n as f64; n];
        }
        let a = rng.random_range(0..probs.len());
        let lambda = rng.random::<f64>();
        let b = rng.random::<f64>();
        reward_inaction_update(&mut probs, a, lambda, b);
        let sum: f64 = probs.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        if probs.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            worst = f64::INFINITY;
        }
    }

    let mut state = SatisfactionState::new(7, LearningRate { slope: 0.1, offset: 0.001 }, &mut rng);
    let mut reached = None;
    for i in 1..=100_000u64 {
        state.step_with_scale(0.5, &mut rng);
        if state.probs().iter().cloned().fold(0.0, f64::max) >= 0.99 {
            reached = Some(i);
            break;
        }
    }
    let pass = worst <= 1e-9 && reached.is_some();
    (pass, format!("max |sum-1| {worst:.2e} over 1e6 updates; max pi >= 0.99 at iteration {reached:?}"))
}

fn c4_scheduler_equivalence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..1_000 {
        let n = rng.random_range(1..=12);
        let rb = rng.random_range(1..=50);
        let speed = [3.0, 30.0, 60.0, 120.0][rng.random_range(0..4)];
        let rates: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..rb).map(|_| rng.random_range(0.0..2e6)).collect())
            .collect();
        let ues: Vec<CellUe<'_>> = rates
            .iter()
            .enumerate()
            .map(|(i, r)| CellUe {
                ue: UeId(i * 3 + 1),
                rb_rates_bps: r,
                avg_rate_bps: if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random_range(1e3..5e6) },
                speed_kmh: speed,
            })
            .collect();
        let a = schedule_tti(&ues, rb, SchedulerMode::ClassicalPf, 0.0, 1.0);
        let b = schedule_tti(&ues, rb, SchedulerMode::ContextAware, 0.0, 1.0);
        if a.rb_owner != b.rb_owner {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("{mismatches} of 1000 instances differ"))
}

fn c5_transfer() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let avg = rng.random_range(0.0..1e8);
        let inst = rng.random_range(0.0..1e8);
        let t = rng.random_range(1.0..10_000.0);
        let ts = rng.random_range(0.1..10.0);
        let want = (t * avg + inst * ts) / (t + ts);
        let got = transfer_history(avg, inst, t, ts);
        let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(rel);
    }
    (worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn c6_golden_trace() -> (bool, String) {
    let mut parts = Vec::new();
    let mut pass = true;
    for ttt in [40, 480] {
        let want = common::oracle_trigger(ttt, 0.0);
        let mut w = common::crossing_world(ttt, 0.0);
        let got = common::first_trigger(&mut w, 20_000);
        pass &= got == Some((want, 3));
        parts.push(format!("TTT {ttt}: expected {want} ms, got {:?}", got.map(|g| g.0)));
    }
    (pass, parts.join("; "))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn select<'a>(points: &'a [PointReport], learner: Learner, ttt: u64, vel: Option<f64>) -> impl Iterator<Item = &'a PointReport> {
    points
        .iter()
        .filter(move |p| p.params.learner == learner.as_str() && p.params.ttt_ms == ttt && p.params.velocity_kmh == vel)
}

fn c7_throughput() -> (bool, String) {
    let cfg = preset("fig2_cdf.toml");
    let out = run_experiment(&cfg, None, 1).expect("fig2 sweep");
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    let ttt = cfg.handover.ttt_ms;
    let median = |l| mean(select(&out.points, l, ttt, None).map(|p| p.report.p50_throughput_bps));
    let base = median(Learner::None);
    let (mab, sat) = (median(Learner::Mab) / base, median(Learner::Satisfaction) / base);
    let pass = mab >= 1.25 && sat >= 1.25;
    (
        pass,
        format!("classical median {:.3} Mbit/s; mab {mab:.3}x, satisfaction {sat:.3}x (need >= 1.25x)", base / 1e6),
    )
}

/// Fixed-velocity runs at 60 and 120 km/h for both TTTs, shared by 8 and 9.
fn mobility_sweep() -> Vec<PointReport> {
    let mut cfg = preset("fig5_hof.toml");
    cfg.sweep.fixed_velocity_kmh = vec![60.0, 120.0];
    cfg.sweep.ttt_ms = vec![40, 480];
    let out = run_experiment(&cfg, None, 1).expect("mobility sweep");
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    out.points
}

fn c8_hof(points: &[PointReport]) -> (bool, String) {
    let hof = |l, v| mean(select(points, l, 480, Some(v)).map(|p| p.report.hof_probability));
    let mut pass = true;
    let mut parts = Vec::new();
    for (v, factor) in [(60.0, 1.0), (120.0, 0.75)] {
        let base = hof(Learner::None, v);
        let (m, s) = (hof(Learner::Mab, v), hof(Learner::Satisfaction, v));
        pass &= m <= factor * base && s <= factor * base;
        parts.push(format!("{v} km/h: classical {base:.3}, mab {m:.3}, satisfaction {s:.3} (limit {:.3})", factor * base));
    }
    (pass, parts.join("; "))
}

fn c9_pp(points: &[PointReport]) -> (bool, String) {
    let pp = |l, t, v| mean(select(points, l, t, Some(v)).map(|p| p.report.pp_probability));
    let mut pass = true;
    let mut parts = Vec::new();
    for l in [Learner::None, Learner::Mab, Learner::Satisfaction] {
        for v in [60.0, 120.0] {
            let (long, short) = (pp(l, 480, v), pp(l, 40, v));
            pass &= long < short && long < 0.05;
            parts.push(format!("{l}@{v}: {long:.3} vs {short:.3}"));
        }
    }
    (pass, format!("pp(480) vs pp(40): {}", parts.join(", ")))
}

fn c10_determinism() -> (bool, String) {
    let mut cfg = preset("fig2_cdf.toml");
    cfg.seeds = vec![7];
    let dir = tempfile::tempdir().expect("tempdir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&cfg, Some(&a), 1).expect("first run");
    run_experiment(&cfg, Some(&b), 1).expect("second run");
    let read = |d: &PathBuf| std::fs::read(d.join("summary.csv")).expect("summary.csv");
    let (x, y) = (read(&a), read(&b));
    (x == y && !x.is_empty(), format!("summary.csv {} bytes, identical: {}", x.len(), x == y))
}

fn timed(id: u32, hard: bool, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = f();
    let v = Verdict {
        id,
        pass,
        hard,
        detail,
        secs: start.elapsed().as_secs_f64(),
    };
    println!("{}", line(&v));
    v
}

fn line(v: &Verdict) -> String {
    format!(
        "criterion {:>2}: {} ({:.1} s) {}",
        v.id,
        if v.pass { "PASS" } else { "FAIL" },
        v.secs,
        v.detail
    )
}

fn main() {
    // `cargo test -- --list` and friends pass flags we have nothing to do with.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut all = vec![
        timed(1, true, c1_rb_exclusivity),
        timed(2, true, c2_ucb),
        timed(3, true, c3_satisfaction),
        timed(4, true, c4_scheduler_equivalence),
        timed(5, true, c5_transfer),
        timed(6, true, c6_golden_trace),
        timed(7, false, c7_throughput),
    ];
    let start = Instant::now();
    let sweep = mobility_sweep();
    let shared = start.elapsed().as_secs_f64();
    println!("(fixed-velocity sweep for 8 and 9: {shared:.0} s)");
    all.push(timed(8, false, || c8_hof(&sweep)));
    all.push(timed(9, false, || c9_pp(&sweep)));
    all.push(timed(10, true, c10_determinism));

    let hard_failures: Vec<u32> = all.iter().filter(|v| v.hard && !v.pass).map(|v| v.id).collect();
    let trend_failures: Vec<u32> = all.iter().filter(|v| !v.hard && !v.pass).map(|v| v.id).collect();
    if !trend_failures.is_empty() {
        println!("trend criteria not met: {trend_failures:?} (reported, not enforced)");
    }
    if !hard_failures.is_empty() {
        eprintln!("exact criteria failed: {hard_failures:?}");
        std::process::exit(1);
    }
}
