//! Deterministic artifact emission: per-slot CSV, per-session CSV, a JSON
//! summary, and a JSON-lines event journal. Identical runs produce
//! byte-identical files.

use crate::runner::RunResult;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("could not write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("could not serialize {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
}

/// Formats a float for CSV/JSON output: fixed six decimal places, with
/// negative zero collapsed so sign noise can never break byte-equality.
pub fn fmt_f64(value: f64) -> String {
    let mut s = format!("{value:.6}");
    if s == "-0.000000" {
        s = "0.000000".to_owned();
    }
    s
}

pub fn timeseries_csv(result: &RunResult) -> String {
    let mut out = String::from(
        "slot,price_per_kwh,reference_kw,limit_kw,commanded_kw,applied_kw,\
         soc_estimate_kwh,soc_true_kwh,active_sessions\n",
    );
    for row in &result.timeseries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.slot,
            fmt_f64(row.price_per_kwh),
            fmt_f64(row.reference_kw),
            fmt_f64(row.limit_kw),
            fmt_f64(row.commanded_kw),
            fmt_f64(row.applied_kw),
            fmt_f64(row.soc_estimate_kwh),
            fmt_f64(row.soc_true_kwh),
            row.active_sessions,
        );
    }
    out
}

pub fn sessions_csv(result: &RunResult) -> String {
    let mut out = String::from(
        "session,rfid,socket,start_slot,end_slot,planned_departure_slot,\
         target_soc_kwh,final_soc_estimate_kwh,final_soc_true_kwh,final_soc_true_pct,\
         metered_energy_kwh,plant_energy_kwh,accrued_cost,best_effort\n",
    );
    for s in &result.sessions {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.session,
            s.rfid,
            s.socket,
            s.start_slot,
            s.end_slot,
            s.planned_departure_slot,
            fmt_f64(s.target_soc_kwh),
            fmt_f64(s.final_soc_estimate_kwh),
            fmt_f64(s.final_soc_true_kwh),
            fmt_f64(s.final_soc_true_pct),
            fmt_f64(s.metered_energy_kwh),
            fmt_f64(s.plant_energy_kwh),
            fmt_f64(s.accrued_cost),
            s.best_effort,
        );
    }
    out
}

pub fn summary_json(result: &RunResult) -> Result<String, OutputError> {
    #[derive(Serialize)]
    struct SessionSummary<'a> {
        session: &'a str,
        final_soc_true_pct: f64,
        metered_energy_kwh: f64,
        accrued_cost: f64,
        best_effort: bool,
    }
    let sessions: Vec<SessionSummary> = result
        .sessions
        .iter()
        .map(|s| SessionSummary {
            session: &s.session,
            final_soc_true_pct: round6(s.final_soc_true_pct),
            metered_energy_kwh: round6(s.metered_energy_kwh),
            accrued_cost: round6(s.accrued_cost),
            best_effort: s.best_effort,
        })
        .collect();
    let tracking = result.tracking.as_ref().map(|t| {
        json!({
            "mean_abs_dev_kw": round6(t.mean_abs_dev),
            "max_dev_kw": round6(t.max_dev),
            "mse_kw2": round6(t.mse),
            "samples": t.samples,
        })
    });
    let value = json!({
        "scenario": result.scenario_name,
        "horizon_slots": result.horizon,
        "sessions": sessions,
        "tracking": tracking,
        "channel": {
            "reports_sent": result.channel.reports_sent,
            "reports_dropped": result.channel.reports_dropped,
        },
        "replans": result.replans().count(),
        "violations": result.violations,
        "invariants_held": result.invariants_held(),
    });
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|source| OutputError::Json { what: "summary", source })?;
    text.push('\n');
    Ok(text)
}

pub fn events_jsonl(result: &RunResult) -> Result<String, OutputError> {
    let mut out = String::new();
    for event in &result.events {
        let line = serde_json::to_string(event)
            .map_err(|source| OutputError::Json { what: "event", source })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Writes all four artifacts into `dir`, creating it if needed.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<(), OutputError> {
    let write = |name: &str, content: &str| -> Result<(), OutputError> {
        let path = dir.join(name);
        fs::write(&path, content)
            .map_err(|source| OutputError::Io { path: path.display().to_string(), source })
    };
    fs::create_dir_all(dir)
        .map_err(|source| OutputError::Io { path: dir.display().to_string(), source })?;
    write("timeseries.csv", &timeseries_csv(result))?;
    write("sessions.csv", &sessions_csv(result))?;
    write("summary.json", &summary_json(result)?)?;
    write("events.jsonl", &events_jsonl(result)?)?;
    Ok(())
}

fn round6(value: f64) -> f64 {
    let rounded = (value * 1e6).round() / 1e6;
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}
