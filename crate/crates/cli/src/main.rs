use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hetnet_core::config::parse_config;
use hetnet_core::experiment::{plan, report_dir, run_experiment};
use hetnet_core::SimError;

/// Environment variable overriding the output directory.
const OUT_DIR_ENV: &str = "HETNET_OUT_DIR";

#[derive(Parser)]
#[command(name = "hetnet", version, about = "Two-tier HetNet mobility simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point of a config file.
    Simulate {
        config: PathBuf,
        /// Run this seed only, overriding `seed` and `seeds`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config and HETNET_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the planned points and exit.
        #[arg(long)]
        dry_run: bool,
        /// Simulations to run in parallel.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Re-aggregate the KPI logs in a results directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            dry_run,
            workers,
        } => simulate(config, seed, out, dry_run, workers),
        Command::Report { dir } => match report_dir(&dir) {
            Ok(points) => {
                println!("re-aggregated {} logs in {}", points.len(), dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}

fn simulate(path: PathBuf, seed: Option<u64>, out: Option<PathBuf>, dry_run: bool, workers: usize) -> ExitCode {
    let (mut cfg, warnings) = match parse_config(&path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    for w in warnings {
        log::warn!("{w}");
    }
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.seeds.clear();
    }
    if let Some(dir) = out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) {
        cfg.output_dir = dir;
    }

    let points = plan(&cfg);
    println!("{} simulation(s) planned", points.len());
    if dry_run {
        for p in &points {
            println!("{}", p.name());
        }
        return ExitCode::SUCCESS;
    }

    match run_experiment(&cfg, Some(&cfg.output_dir), workers) {
        Ok(outcome) => {
            println!(
                "{} of {} simulation(s) completed; results in {}",
                outcome.points.len(),
                outcome.total,
                cfg.output_dir.display()
            );
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for (name, msg) in &outcome.failures {
                    eprintln!("failed: {name}: {msg}");
                }
                ExitCode::from(2)
            }
        }
        Err(SimError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
