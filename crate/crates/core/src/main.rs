//! Command-line driver: single trajectories, ensembles, and engine/oracle
//! cross-checks from a TOML config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use cavity_collapse::config::{parse_config, ConfigError, RunConfig};
use cavity_collapse::output;
use cavity_collapse::run::{self, RunError};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "cavity-collapse",
    about = "Conditional collapse of lattice atom statistics under cavity photon counting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Comma-separated snapshot times, overriding the config cadence.
    /// Interpreted in tau units for transverse probing, 1/kappa otherwise.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single seeded trajectory and emit its snapshots.
    RunTrajectory(CommonArgs),
    /// Run many trajectories on child streams and emit outcome statistics.
    RunEnsemble(CommonArgs),
    /// Compare the reduced engine against the configuration-space oracle.
    OracleCheck(CommonArgs),
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ConfigError::Key {
        key: "config",
        reason: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(snapshots) = &args.snapshots {
        // tau units whenever the geometry defines a tau scale
        let lattice = config.lattice_spec()?;
        let geometry = config.build_geometry(&lattice)?;
        config.run.snapshot_times = None;
        config.run.snapshot_taus = None;
        if geometry.tau_scale().is_some() {
            config.run.snapshot_taus = Some(snapshots.clone());
        } else {
            config.run.snapshot_times = Some(snapshots.clone());
        }
    }
    Ok(config)
}

fn emit_paths(paths: &[PathBuf]) {
    for path in paths {
        println!("wrote {}", path.display());
    }
}

fn execute(command: &Command) -> Result<(), RunError> {
    match command {
        Command::RunTrajectory(args) => {
            let config = load_config(args)?;
            let start = Instant::now();
            let run = run::trajectory_mode(&config)?;
            let wall = start.elapsed().as_secs_f64();
            let paths = output::write_trajectory(
                &args.out_dir,
                &config,
                &run.setup,
                &run.record,
                run.c_squared,
                wall,
            )
            .map_err(|e| runtime(e.to_string()))?;
            println!(
                "trajectory: outcome {} after {} counts, stop time {:.6}, {:.3} s",
                run.record.outcome.label(),
                run.record.jump_times.len(),
                run.record.stop_time,
                wall
            );
            emit_paths(&paths);
            Ok(())
        }
        Command::RunEnsemble(args) => {
            let config = load_config(args)?;
            let start = Instant::now();
            let run = run::ensemble_mode(&config)?;
            let wall = start.elapsed().as_secs_f64();
            let paths = output::write_ensemble(&args.out_dir, &config, &run.summary, wall)
                .map_err(|e| runtime(e.to_string()))?;
            println!(
                "ensemble: {} trajectories ({} resolved), TV distance {:.5}, mean collapse time {:.4}, {:.3} s",
                run.summary.n_trajectories,
                run.summary.n_resolved,
                run.summary.tv_distance,
                run.summary.mean_collapse_time,
                wall
            );
            emit_paths(&paths);
            Ok(())
        }
        Command::OracleCheck(args) => {
            let config = load_config(args)?;
            let start = Instant::now();
            let report = run::oracle_check_mode(&config)?;
            let wall = start.elapsed().as_secs_f64();
            let paths = output::write_oracle_report(&args.out_dir, &config, &report, wall)
                .map_err(|e| runtime(e.to_string()))?;
            println!(
                "oracle check: {} comparisons, max deviation {:.3e} (tolerance {:.0e}): {}",
                report.comparisons,
                report.max_deviation,
                report.tolerance,
                if report.pass { "PASS" } else { "FAIL" }
            );
            emit_paths(&paths);
            if !report.pass {
                return Err(runtime(format!(
                    "engine/oracle deviation {} exceeds {}",
                    report.max_deviation, report.tolerance
                )));
            }
            Ok(())
        }
    }
}

fn runtime(reason: String) -> RunError {
    RunError::Runtime(reason)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(3)
        }
    }
}
