//! Scenario harness for the charging-management stack: loads scenario files,
//! runs the control center against simulated stations over a lossy report
//! channel, emits deterministic CSV/JSON artifacts, and cross-checks small
//! instances against a brute-force oracle.

pub mod oracle;
pub mod output;
pub mod presets;
pub mod runner;
pub mod scenario;
pub mod stats;

pub use oracle::{oracle_check, OracleError, OracleReport};
pub use output::{write_outputs, OutputError};
pub use runner::{run_scenario, EventRecord, RunError, RunResult, SessionRow, SlotRow};
pub use scenario::{Scenario, ScenarioError};
pub use stats::{compute_tracking_stats, StatsError, TrackingStats};
