//! Brute-force optimality oracle for tiny planning instances.
//!
//! The planner's schedules come out of a branch-and-bound over the on/off
//! disjunction of every semi-continuous charging level. For instances small
//! enough to enumerate (at most two sessions, at most six slots), this module
//! instead tries *every* on/off pattern, solves the remaining pure LP for
//! each, and keeps the best — an independent ground truth the planner's
//! objective must match to the solver's own optimality gap.

use crate::scenario::Scenario;
use lac::{
    build_problem, relax_final_soc, solve_schedules, BuiltProblem, ChargingSession,
    ControllerConfig, DsoSignal, LacError, SolveLimits, Tariff,
};
use milp_core::{solve_lp, SolveStatus, GAP_TOL};
use serde::Serialize;
use thiserror::Error;

/// Largest instance the oracle will enumerate.
pub const MAX_ORACLE_SESSIONS: usize = 2;
pub const MAX_ORACLE_SLOTS: usize = 6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "instance too large for the oracle: {sessions} session(s) over {slots} slot(s) \
         (limit: {MAX_ORACLE_SESSIONS} sessions, {MAX_ORACLE_SLOTS} slots)"
    )]
    TooLarge { sessions: usize, slots: usize },
    #[error("planner could not build or solve the instance: {0}")]
    Planner(#[from] LacError),
    #[error("no on/off pattern admits a feasible schedule")]
    NoFeasiblePattern,
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// Objective of the planner's schedule.
    pub solver_objective: f64,
    /// True optimum found by exhaustive pattern enumeration.
    pub oracle_objective: f64,
    /// `|solver - oracle| / max(1, |oracle|)`.
    pub relative_gap: f64,
    /// On/off patterns enumerated (`2^(sessions × slots)` minus pruning).
    pub patterns_tried: usize,
    pub feasible_patterns: usize,
    /// Final-SoC targets had to be relaxed before anything was feasible.
    pub relaxed: bool,
    /// Gap within the solver's own termination tolerance.
    pub agrees: bool,
}

/// Compares the planner against exhaustive enumeration on one instance.
pub fn oracle_check_instance(
    sessions: &[ChargingSession],
    tariff: &Tariff,
    signal: &DsoSignal,
    config: &ControllerConfig,
) -> Result<OracleReport, OracleError> {
    if sessions.len() > MAX_ORACLE_SESSIONS || config.horizon_slots > MAX_ORACLE_SLOTS {
        return Err(OracleError::TooLarge {
            sessions: sessions.len(),
            slots: config.horizon_slots,
        });
    }
    let problem = build_problem(sessions, tariff, signal, config, 0)?;
    let solution = solve_schedules(&problem, config, &SolveLimits::default())?;
    let enumerated = if solution.relaxed {
        enumerate(&relax_final_soc(&problem))
    } else {
        enumerate(&problem)
    };
    let Some((oracle_objective, patterns_tried, feasible_patterns)) = enumerated else {
        return Err(OracleError::NoFeasiblePattern);
    };
    let scale = oracle_objective.abs().max(1.0);
    let relative_gap = (solution.objective - oracle_objective).abs() / scale;
    Ok(OracleReport {
        solver_objective: solution.objective,
        oracle_objective,
        relative_gap,
        patterns_tried,
        feasible_patterns,
        relaxed: solution.relaxed,
        // The branch-and-bound stops at GAP_TOL; LP numerics add a hair.
        agrees: relative_gap <= GAP_TOL + 1e-9,
    })
}

/// Runs the oracle on a scenario's initial planning problem (all
/// reservations live, time zero).
pub fn oracle_check(scenario: &Scenario) -> Result<OracleReport, OracleError> {
    oracle_check_instance(
        &scenario.planning_sessions(),
        &Tariff { prices_per_kwh: scenario.tariff.clone() },
        &scenario.dso_signal(),
        &scenario.controller_config(),
    )
}

/// Solves the LP for every on/off pattern of the semi-continuous variables;
/// returns `(best objective, patterns tried, feasible patterns)`.
fn enumerate(problem: &BuiltProblem) -> Option<(f64, usize, usize)> {
    let mut model = problem.model.clone();
    let semis = model.semi_continuities().to_vec();
    model.clear_semi_continuities();
    let upper: Vec<f64> = model.upper_bounds().to_vec();

    debug_assert!(semis.len() <= MAX_ORACLE_SESSIONS * MAX_ORACLE_SLOTS);
    let patterns = 1usize << semis.len();
    let mut best: Option<f64> = None;
    let mut feasible = 0usize;
    for mask in 0..patterns {
        for (bit, semi) in semis.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                model.set_bounds(semi.var, semi.threshold, upper[semi.var]);
            } else {
                model.set_bounds(semi.var, 0.0, 0.0);
            }
        }
        let solution = solve_lp(&model).expect("pattern model stays well-formed");
        if solution.status == SolveStatus::Optimal {
            feasible += 1;
            if best.is_none_or(|b| solution.objective_value < b) {
                best = Some(solution.objective_value);
            }
        }
    }
    best.map(|b| (b, patterns, feasible))
}
