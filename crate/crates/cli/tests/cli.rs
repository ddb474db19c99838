use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hetnet(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hetnet"));
    cmd.args(args).env_remove("HETNET_OUT_DIR").env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn hetnet")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const TINY: &str = "duration_ms = 300\n[engine]\nwarmup_ms = 100\n[scenario]\nues_per_sector = 2\n";

#[test]
fn dry_run_lists_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seeds = [1, 2, 3]\n[sweep]\npico_count = [1, 2, 3]\n");
    let out = hetnet(&["simulate", &cfg, "--dry-run"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("9 simulation(s) planned"), "{text}");
    assert!(text.contains("pico_count=3__seed=2"));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn simulate_writes_results_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("out");
    let out = hetnet(&["simulate", &cfg, "--seed", "4", "--out", out_dir.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("seed=4.json").is_file());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);

    let again = hetnet(&["report", out_dir.to_str().unwrap()], &[]);
    assert!(again.status.success());
    assert_eq!(summary, fs::read_to_string(out_dir.join("summary.csv")).unwrap());
}

#[test]
fn env_var_overrides_config_but_not_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let env_dir = dir.path().join("from_env");
    let out = hetnet(&["simulate", &cfg], &[("HETNET_OUT_DIR", &env_dir)]);
    assert!(out.status.success());
    assert!(env_dir.join("summary.csv").is_file());

    let flag_dir = dir.path().join("from_flag");
    let out = hetnet(
        &["simulate", &cfg, "--out", flag_dir.to_str().unwrap()],
        &[("HETNET_OUT_DIR", &dir.path().join("unused"))],
    );
    assert!(out.status.success());
    assert!(flag_dir.join("summary.csv").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[radio]\nrb_count = \"many\"\n");
    let out = hetnet(&["simulate", &cfg, "--dry-run"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("rb_count"), "{err}");

    let missing = hetnet(&["simulate", "/nonexistent/run.toml"], &[]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn failed_simulation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{TINY}min_pico_pico_distance_m = 400.0\nmax_placement_attempts = 20\npicos_per_sector = 6\n");
    let cfg = write_config(dir.path(), &body);
    let out = hetnet(&["simulate", &cfg, "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_on_missing_dir_fails() {
    let out = hetnet(&["report", "/nonexistent/results"], &[]);
    assert_eq!(out.status.code(), Some(2));
}
