//! Load-area controller: cost- and reference-tracking-optimal charging
//! schedules for a pool of vehicle charging sessions, computed by
//! model-predictive re-planning over a slotted horizon.
//!
//! The crate is organized around one loop:
//!
//! 1. [`build_problem`] turns the live sessions, tariff, and grid-operator
//!    signal into a semi-continuous linear program;
//! 2. [`solve_schedules`] solves it (relaxing final-SoC targets if it must)
//!    and decodes per-session [`LoadSchedule`]s;
//! 3. [`Controller`] owns the session state between solves, folds in
//!    metering feedback, and decides when to re-plan;
//! 4. [`verify_schedules`] independently re-checks any set of schedules
//!    against the raw constraint semantics.

mod controller;
mod estimate;
mod problem;
mod session;
mod types;

pub use controller::{Controller, ControllerEvent, ManagedSession, ReplanOutcome};
pub use estimate::{
    estimate_capacity, kwh_to_pct, pct_to_kwh, soc_predict, unaccounted_energy, EstimateError,
    MIN_SOC_DELTA_PCT,
};
pub use problem::{
    build_problem, relax_final_soc, solve_schedules, tail_objective, verify_schedules,
    BuiltProblem, LacError, ScheduleSolution, ScheduleViolation, ScheduleViolationKind,
    SessionVars,
};
pub use session::{ChargingSession, SessionError, SessionId, SessionStatus, Slot, SocketId};
pub use types::{ControllerConfig, DsoSignal, LoadSchedule, Tariff};

// Solver knobs appear in this crate's signatures; spare callers a direct
// dependency on the solver crate.
pub use milp_core::SolveLimits;
