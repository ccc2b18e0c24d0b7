//! `emsim` — scenario runner for the charging-management stack.
//!
//! Subcommands: `run` a scenario file, run a built-in `preset`, check a tiny
//! scenario against the brute-force `oracle`, or compute tracking `stats`
//! from two CSV series. Log verbosity comes from the `RUST_LOG` environment
//! variable (`error`, `warn`, `info`, `debug`, `trace`).

use clap::{Parser, Subcommand};
use harness_cli::output::write_outputs;
use harness_cli::runner::run_scenario;
use harness_cli::scenario::Scenario;
use harness_cli::stats::compute_tracking_stats;
use harness_cli::{oracle, presets};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "emsim",
    about = "Deterministic charging-management simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write CSV/JSON artifacts.
    Run {
        /// Scenario JSON document.
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for timeseries.csv, sessions.csv, summary.json,
        /// events.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's report-channel seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in scenario (test1, test2, test2-nominal).
    Preset {
        /// Preset name.
        name: String,
        /// Output directory; also receives the scenario as scenario.json.
        #[arg(long)]
        out: PathBuf,
        /// Battery capacity the planner assumes for test1 (kWh).
        #[arg(long, default_value_t = presets::DATASHEET_CAPACITY_KWH)]
        assumed_capacity_kwh: f64,
        /// Overrides the preset's report-channel seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the planner against brute-force enumeration on a tiny
    /// scenario (at most 2 sessions and 6 slots).
    Oracle {
        /// Scenario JSON document.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Tracking statistics between a commanded and an applied power series.
    Stats {
        /// CSV with one commanded value (kW) per line.
        #[arg(long)]
        commanded: PathBuf,
        /// CSV with one applied value (kW) per line.
        #[arg(long)]
        applied: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run_command(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run { scenario, out, seed } => {
            let scenario = Scenario::from_path(&scenario).map_err(|e| e.to_string())?;
            execute(&scenario, seed, &out)
        }
        Command::Preset { name, out, assumed_capacity_kwh, seed } => {
            let mut scenario = presets::by_name(&name)
                .ok_or_else(|| format!("unknown preset {name:?} (try test1, test2, test2-nominal)"))?;
            if name == "test1" {
                scenario = presets::test1(assumed_capacity_kwh);
            }
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            std::fs::write(out.join("scenario.json"), scenario.to_json())
                .map_err(|e| e.to_string())?;
            execute(&scenario, seed, &out)
        }
        Command::Oracle { scenario } => {
            let scenario = Scenario::from_path(&scenario).map_err(|e| e.to_string())?;
            let report = oracle::oracle_check(&scenario).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
            Ok(if report.agrees { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Stats { commanded, applied } => {
            let commanded = read_series(&commanded)?;
            let applied = read_series(&applied)?;
            let stats =
                compute_tracking_stats(&commanded, &applied, None).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&stats).map_err(|e| e.to_string())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn execute(scenario: &Scenario, seed: Option<u64>, out: &Path) -> Result<ExitCode, String> {
    let result = run_scenario(scenario, seed).map_err(|e| e.to_string())?;
    write_outputs(&result, out).map_err(|e| e.to_string())?;
    for session in &result.sessions {
        println!(
            "{}: reached {:.1}% (target {:.1} kWh), {:.3} kWh metered, cost {:.3}{}",
            session.session,
            session.final_soc_true_pct,
            session.target_soc_kwh,
            session.metered_energy_kwh,
            session.accrued_cost,
            if session.best_effort { " [best effort]" } else { "" },
        );
    }
    if result.invariants_held() {
        println!("ok: {} slots, all schedule checks passed", result.horizon);
        Ok(ExitCode::SUCCESS)
    } else {
        for violation in &result.violations {
            eprintln!("violation: {violation}");
        }
        Ok(ExitCode::FAILURE)
    }
}

/// Reads a single numeric column, tolerating one header line.
fn read_series(path: &Path) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue, // header
            Err(_) => {
                return Err(format!(
                    "{}:{}: expected one number per line, got {line:?}",
                    path.display(),
                    i + 1
                ))
            }
        }
    }
    Ok(values)
}
