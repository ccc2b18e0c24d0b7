//! Translation between charging sessions and the semi-continuous linear
//! program the controller solves, plus decoding, relaxation, and an
//! independent re-checker for the resulting schedules.
//!
//! Variable layout of a built model (indices grow left to right):
//!
//! ```text
//! [t] [u_1 .. u_n | x_1 .. x_n | s]  [u_1 .. | x_1 .. | s]  ...
//!  |   `--------- session A ------'  `----- session B ----'
//!  `- worst-slot tracking epigraph
//! ```
//!
//! Per session and slot, `u` is the semi-continuous on-fraction, `x` the
//! state of charge *after* that slot (tied to `u` by equality rows), and `s`
//! a final-SoC shortfall slot that is pinned to zero in the strict model and
//! widened (at a steep objective penalty) when the strict model proves
//! infeasible, so the relaxation never changes the model's shape.

use crate::estimate::soc_predict;
use crate::session::{ChargingSession, SessionError, SessionId, SessionStatus, Slot};
use crate::types::{ControllerConfig, DsoSignal, LoadSchedule, Tariff};
use milp_core::{
    solve_semi_continuous, MilpModel, ModelError, Relation, SolveLimits, SolveStatus,
};
use std::collections::BTreeMap;

/// Planning failures surfaced to the caller.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LacError {
    #[error("{what} covers {have} slots but the plan needs {needed}")]
    HorizonTooShort { what: &'static str, needed: usize, have: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("planning model rejected: {0}")]
    Model(#[from] ModelError),
    /// Even with final-SoC requirements relaxed there is no admissible
    /// schedule (e.g. the cost cap and the aggregate limit contradict).
    #[error("no feasible schedule exists even with final-SoC requirements relaxed")]
    StillInfeasible,
    #[error("search budget exhausted before any feasible schedule was found")]
    SearchBudget,
    #[error("decoded SoC for session {session} drifts {diff} kWh from its recursion at slot {slot}")]
    EncodingMismatch { session: SessionId, slot: Slot, diff: f64 },
    #[error("internal solver anomaly: {0}")]
    Internal(&'static str),
}

/// Where one session's variables live inside a built model.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionVars {
    pub id: SessionId,
    /// First slot the plan covers for this session.
    pub first_slot: Slot,
    /// Exclusive end of the covered window (the departure slot).
    pub end_slot: Slot,
    /// Index of the first on-fraction variable.
    pub u0: usize,
    /// Index of the first SoC variable.
    pub soc0: usize,
    /// Index of the final-SoC shortfall variable.
    pub slack_var: usize,
    pub max_power_kw: f64,
    pub min_on_fraction: f64,
    pub loss_factor: f64,
    /// SoC at `first_slot`, clamped into the session's SoC box.
    pub start_soc_kwh: f64,
    /// Battery energy gained by one fully-on slot (kWh).
    pub gain_kwh: f64,
}

impl SessionVars {
    pub fn slot_count(&self) -> usize {
        self.end_slot - self.first_slot
    }

    /// On-fraction variable for slot `k` (must lie in the covered window).
    pub fn u_var(&self, k: Slot) -> usize {
        debug_assert!(k >= self.first_slot && k < self.end_slot);
        self.u0 + (k - self.first_slot)
    }

    /// SoC-after-slot-`k` variable (must lie in the covered window).
    pub fn soc_var(&self, k: Slot) -> usize {
        debug_assert!(k >= self.first_slot && k < self.end_slot);
        self.soc0 + (k - self.first_slot)
    }
}

/// A ready-to-solve planning model plus the layout needed to decode it.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProblem {
    pub model: MilpModel,
    /// Slot the plan starts at.
    pub from_slot: Slot,
    pub horizon_slots: usize,
    /// Index of the worst-slot tracking epigraph variable (always 0).
    pub tracking_var: usize,
    pub sessions: Vec<SessionVars>,
    /// Objective penalty per kWh of final-SoC shortfall once relaxed.
    pub relax_penalty: f64,
    /// Whether the shortfall slots have been widened.
    pub relaxed: bool,
}

/// Builds the planning model for the given sessions over
/// `[now, config.horizon_slots)`.
///
/// Objective: energy cost of all scheduled charging plus
/// `tracking_weight * max_k weights[k] * |aggregate_kw[k] - reference_kw[k]|`.
/// Constraints: per-slot aggregate limit, per-session SoC recursion and box,
/// final-SoC target, semi-continuous on-fractions, and — for sessions that
/// already have a reference cost — a cap on total planned spend.
///
/// Sessions that are not `Active` or whose window has fully elapsed get no
/// variables. A departure beyond the horizon is an error: the plan could not
/// see the session to its end.
pub fn build_problem(
    sessions: &[ChargingSession],
    tariff: &Tariff,
    signal: &DsoSignal,
    config: &ControllerConfig,
    now: Slot,
) -> Result<BuiltProblem, LacError> {
    let horizon = config.horizon_slots;
    let from = now.min(horizon);
    if tariff.len() < horizon {
        return Err(LacError::HorizonTooShort {
            what: "tariff",
            needed: horizon,
            have: tariff.len(),
        });
    }
    for (what, len) in [
        ("reference profile", signal.reference_kw.len()),
        ("aggregate limit", signal.limit_kw.len()),
        ("tracking weights", signal.weights.len()),
    ] {
        if len < horizon {
            return Err(LacError::HorizonTooShort { what, needed: horizon, have: len });
        }
    }

    let slot_hours = config.slot_hours();
    let mut entries: Vec<(SessionVars, &ChargingSession)> = Vec::new();
    let mut next_var = 1usize;
    let mut max_power = 0.0f64;
    for s in sessions {
        s.validate()?;
        if s.status != SessionStatus::Active {
            continue;
        }
        if s.departure_slot > horizon {
            return Err(LacError::HorizonTooShort {
                what: "session window",
                needed: s.departure_slot,
                have: horizon,
            });
        }
        let first = from.max(s.start_slot);
        if first >= s.departure_slot {
            continue;
        }
        let n = s.departure_slot - first;
        entries.push((
            SessionVars {
                id: s.id.clone(),
                first_slot: first,
                end_slot: s.departure_slot,
                u0: next_var,
                soc0: next_var + n,
                slack_var: next_var + 2 * n,
                max_power_kw: s.max_power_kw,
                min_on_fraction: s.min_on_fraction,
                loss_factor: s.loss_factor,
                start_soc_kwh: s.soc_kwh.clamp(s.min_soc_kwh, s.max_soc_kwh),
                gain_kwh: s.slot_gain_kwh(slot_hours),
            },
            s,
        ));
        next_var += 2 * n + 1;
        max_power = max_power.max(s.max_power_kw);
    }

    let max_price =
        tariff.prices_per_kwh[from..horizon].iter().fold(0.0f64, |acc, &p| acc.max(p));
    // Steep enough that a unit of shortfall always loses to any amount of
    // honest charging, yet finite so the relaxed model stays well scaled.
    let relax_penalty = (1000.0 * slot_hours * max_power * max_price).max(1.0);

    let mut model = MilpModel::new(next_var);
    model.set_bounds(0, 0.0, f64::INFINITY);
    model.set_objective(0, config.tracking_weight);

    for (sv, s) in &entries {
        for k in sv.first_slot..sv.end_slot {
            let u = sv.u_var(k);
            model.set_bounds(u, 0.0, 1.0);
            model.set_objective(u, sv.max_power_kw * slot_hours * tariff.price(k));
            model.mark_semi_continuous(u, sv.min_on_fraction);
        }
        for k in sv.first_slot..sv.end_slot {
            model.set_bounds(sv.soc_var(k), s.min_soc_kwh, s.max_soc_kwh);
        }
        model.set_bounds(sv.slack_var, 0.0, 0.0);
        model.set_objective(sv.slack_var, relax_penalty);
    }

    // Worst-slot tracking epigraph: t >= w_k * |aggregate_k - reference_k|
    // for every slot still ahead, written as a pair of <= rows.
    for k in from..horizon {
        let w = signal.weights[k];
        let mut plus = vec![0.0; next_var];
        plus[0] = -1.0;
        for (sv, _) in &entries {
            if k >= sv.first_slot && k < sv.end_slot {
                plus[sv.u_var(k)] = w * sv.max_power_kw;
            }
        }
        let mut minus: Vec<f64> = plus.iter().map(|&c| -c).collect();
        minus[0] = -1.0;
        let rhs = w * signal.reference_kw[k];
        model.add_constraint(plus, Relation::Le, rhs);
        model.add_constraint(minus, Relation::Le, -rhs);
    }

    // Hard aggregate limit, only where some session can actually draw power.
    for k in from..horizon {
        let mut row = vec![0.0; next_var];
        let mut any = false;
        for (sv, _) in &entries {
            if k >= sv.first_slot && k < sv.end_slot {
                row[sv.u_var(k)] = sv.max_power_kw;
                any = true;
            }
        }
        if any {
            model.add_constraint(row, Relation::Le, signal.limit_kw[k]);
        }
    }

    for (sv, s) in &entries {
        // SoC recursion: x_k - x_{k-1} = gain * u_k, anchored at the current
        // SoC estimate.
        for k in sv.first_slot..sv.end_slot {
            let mut row = vec![0.0; next_var];
            row[sv.soc_var(k)] = 1.0;
            row[sv.u_var(k)] = -sv.gain_kwh;
            let rhs = if k == sv.first_slot {
                sv.start_soc_kwh
            } else {
                row[sv.soc_var(k - 1)] = -1.0;
                0.0
            };
            model.add_constraint(row, Relation::Eq, rhs);
        }

        // Departure requirement; the shortfall slot is pinned at zero until
        // the model is explicitly relaxed.
        let mut row = vec![0.0; next_var];
        row[sv.soc_var(sv.end_slot - 1)] = 1.0;
        row[sv.slack_var] = 1.0;
        model.add_constraint(row, Relation::Ge, s.target_soc_kwh);

        // Spending cap against the session's first-ever schedule.
        if let Some(reference_cost) = s.reference_cost {
            let mut row = vec![0.0; next_var];
            for k in sv.first_slot..sv.end_slot {
                row[sv.u_var(k)] = sv.max_power_kw * slot_hours * tariff.price(k);
            }
            let budget = (1.0 + config.cost_cap_slack) * reference_cost - s.accrued_cost;
            model.add_constraint(row, Relation::Le, budget);
        }
    }

    Ok(BuiltProblem {
        model,
        from_slot: from,
        horizon_slots: horizon,
        tracking_var: 0,
        sessions: entries.into_iter().map(|(sv, _)| sv).collect(),
        relax_penalty,
        relaxed: false,
    })
}

/// Widens every session's final-SoC shortfall slot from `[0, 0]` to
/// `[0, inf)`, turning the departure requirement into a heavily penalized
/// soft constraint. Everything else is untouched.
pub fn relax_final_soc(problem: &BuiltProblem) -> BuiltProblem {
    let mut relaxed = problem.clone();
    for sv in &relaxed.sessions {
        relaxed.model.set_bounds(sv.slack_var, 0.0, f64::INFINITY);
    }
    relaxed.relaxed = true;
    relaxed
}

/// Schedules decoded from one successful solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSolution {
    pub schedules: BTreeMap<SessionId, LoadSchedule>,
    /// Model objective: energy cost + weighted worst-slot deviation, plus
    /// shortfall penalties if `relaxed`.
    pub objective: f64,
    /// The strict model was infeasible and final-SoC targets were relaxed.
    pub relaxed: bool,
    /// The node budget ran out; the schedules are the best found, not proven
    /// optimal.
    pub node_limited: bool,
    /// Final-SoC shortfall per session (kWh), only entries > 1e-9.
    pub shortfall_kwh: BTreeMap<SessionId, f64>,
}

/// Solves a built problem, falling back to the final-SoC relaxation when the
/// strict model is infeasible.
pub fn solve_schedules(
    problem: &BuiltProblem,
    config: &ControllerConfig,
    limits: &SolveLimits,
) -> Result<ScheduleSolution, LacError> {
    if let Some(solution) = attempt(problem, config, limits)? {
        return Ok(solution);
    }
    let relaxed = relax_final_soc(problem);
    match attempt(&relaxed, config, limits)? {
        Some(solution) => Ok(solution),
        None => Err(LacError::StillInfeasible),
    }
}

fn attempt(
    problem: &BuiltProblem,
    config: &ControllerConfig,
    limits: &SolveLimits,
) -> Result<Option<ScheduleSolution>, LacError> {
    let sol = solve_semi_continuous(&problem.model, limits)?;
    match sol.status {
        SolveStatus::Optimal => decode(problem, &sol.values, sol.objective_value, config, false).map(Some),
        SolveStatus::NodeLimit if !sol.values.is_empty() => {
            decode(problem, &sol.values, sol.objective_value, config, true).map(Some)
        }
        SolveStatus::NodeLimit => Err(LacError::SearchBudget),
        SolveStatus::Unbounded => Err(LacError::Internal("planning model is unbounded")),
        SolveStatus::Infeasible => Ok(None),
    }
}

fn decode(
    problem: &BuiltProblem,
    values: &[f64],
    objective: f64,
    config: &ControllerConfig,
    node_limited: bool,
) -> Result<ScheduleSolution, LacError> {
    let mut schedules = BTreeMap::new();
    let mut shortfall_kwh = BTreeMap::new();
    for sv in &problem.sessions {
        let mut levels = Vec::with_capacity(sv.slot_count());
        for k in sv.first_slot..sv.end_slot {
            let mut u = values[sv.u_var(k)];
            if u.abs() <= 1e-9 {
                u = 0.0;
            }
            levels.push(u.clamp(0.0, 1.0));
        }
        let predicted_soc_kwh = soc_predict(
            sv.start_soc_kwh,
            &levels,
            sv.max_power_kw,
            sv.loss_factor,
            config.slot_hours(),
        );
        // The SoC trail must be reproducible from the levels alone; if the
        // encoded trail disagrees with the recursion, the decode is wrong.
        let scale =
            predicted_soc_kwh.iter().fold(1.0f64, |acc, &x| acc.max(x.abs()));
        let tol = 1e-9 * (1.0 + scale);
        for (i, k) in (sv.first_slot..sv.end_slot).enumerate() {
            let diff = (values[sv.soc_var(k)] - predicted_soc_kwh[i + 1]).abs();
            if diff > tol {
                return Err(LacError::EncodingMismatch { session: sv.id.clone(), slot: k, diff });
            }
        }
        let setpoints_kw = levels.iter().map(|u| u * sv.max_power_kw).collect();
        schedules.insert(
            sv.id.clone(),
            LoadSchedule {
                session_id: sv.id.clone(),
                start_slot: sv.first_slot,
                levels,
                setpoints_kw,
                predicted_soc_kwh,
            },
        );
        let slack = values[sv.slack_var];
        if slack > 1e-9 {
            shortfall_kwh.insert(sv.id.clone(), slack);
        }
    }
    Ok(ScheduleSolution {
        schedules,
        objective,
        relaxed: problem.relaxed,
        node_limited,
        shortfall_kwh,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleViolationKind {
    /// Aggregate power exceeds the grid limit in some slot.
    AggregateLimit,
    /// Predicted SoC falls below the session minimum.
    SocBelowMin,
    /// Predicted SoC exceeds the session maximum.
    SocAboveMax,
    /// Final SoC misses the target by more than the declared shortfall.
    FinalSocShortfall,
    /// A level sits strictly between zero and the minimum on-fraction.
    LevelGap,
    /// A level leaves `[0, 1]`.
    LevelRange,
    /// Setpoint and level disagree about the session's power.
    SetpointMismatch,
    /// Planned spend breaks the session's cost cap.
    CostCap,
    /// Schedule window does not match the session window.
    WindowMismatch,
}

/// One independent-check failure; `amount` is the size of the breach in the
/// constraint's own unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleViolation {
    pub kind: ScheduleViolationKind,
    pub session: Option<SessionId>,
    pub slot: Option<Slot>,
    pub amount: f64,
}

/// Re-checks schedules against the raw constraint semantics, sharing no code
/// with the model builder: SoC trails are re-simulated from the levels, and
/// aggregate limits, SoC boxes, final targets (net of declared shortfall),
/// on-fraction gaps, and cost caps are tested directly. Tolerances scale as
/// `tol * (1 + |bound|)`.
pub fn verify_schedules(
    sessions: &[ChargingSession],
    tariff: &Tariff,
    signal: &DsoSignal,
    config: &ControllerConfig,
    schedules: &BTreeMap<SessionId, LoadSchedule>,
    shortfall_kwh: &BTreeMap<SessionId, f64>,
    from_slot: Slot,
    tol: f64,
) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let slot_hours = config.slot_hours();

    for (id, sched) in schedules {
        let Some(s) = sessions.iter().find(|s| &s.id == id) else {
            out.push(ScheduleViolation {
                kind: ScheduleViolationKind::WindowMismatch,
                session: Some(id.clone()),
                slot: None,
                amount: f64::INFINITY,
            });
            continue;
        };
        let expect_start = from_slot.max(s.start_slot);
        if sched.start_slot != expect_start
            || sched.end_slot() != s.departure_slot
            || sched.setpoints_kw.len() != sched.levels.len()
        {
            out.push(ScheduleViolation {
                kind: ScheduleViolationKind::WindowMismatch,
                session: Some(id.clone()),
                slot: Some(sched.start_slot),
                amount: f64::INFINITY,
            });
            continue;
        }

        for (i, (&u, &p)) in sched.levels.iter().zip(&sched.setpoints_kw).enumerate() {
            let k = sched.start_slot + i;
            if u < -tol || u > 1.0 + tol {
                out.push(ScheduleViolation {
                    kind: ScheduleViolationKind::LevelRange,
                    session: Some(id.clone()),
                    slot: Some(k),
                    amount: if u < 0.0 { -u } else { u - 1.0 },
                });
            } else if u > tol && u < s.min_on_fraction - tol {
                out.push(ScheduleViolation {
                    kind: ScheduleViolationKind::LevelGap,
                    session: Some(id.clone()),
                    slot: Some(k),
                    amount: s.min_on_fraction - u,
                });
            }
            let diff = (p - u * s.max_power_kw).abs();
            if diff > tol * (1.0 + s.max_power_kw) {
                out.push(ScheduleViolation {
                    kind: ScheduleViolationKind::SetpointMismatch,
                    session: Some(id.clone()),
                    slot: Some(k),
                    amount: diff,
                });
            }
        }

        // Re-simulated SoC trail (independent of the schedule's own claim).
        let gain = s.slot_gain_kwh(slot_hours);
        let soc_tol = tol * (1.0 + s.max_soc_kwh.abs());
        let mut x = s.soc_kwh.clamp(s.min_soc_kwh, s.max_soc_kwh);
        for (i, &u) in sched.levels.iter().enumerate() {
            let k = sched.start_slot + i;
            x += gain * u;
            if x < s.min_soc_kwh - soc_tol {
                out.push(ScheduleViolation {
                    kind: ScheduleViolationKind::SocBelowMin,
                    session: Some(id.clone()),
                    slot: Some(k),
                    amount: s.min_soc_kwh - x,
                });
            }
            if x > s.max_soc_kwh + soc_tol {
                out.push(ScheduleViolation {
                    kind: ScheduleViolationKind::SocAboveMax,
                    session: Some(id.clone()),
                    slot: Some(k),
                    amount: x - s.max_soc_kwh,
                });
            }
        }
        let declared = shortfall_kwh.get(id).copied().unwrap_or(0.0);
        let final_gap = s.target_soc_kwh - declared - x;
        if final_gap > soc_tol {
            out.push(ScheduleViolation {
                kind: ScheduleViolationKind::FinalSocShortfall,
                session: Some(id.clone()),
                slot: Some(sched.end_slot().saturating_sub(1)),
                amount: final_gap,
            });
        }

        if let Some(reference_cost) = s.reference_cost {
            let planned: f64 = sched
                .setpoints_kw
                .iter()
                .enumerate()
                .map(|(i, &p)| p * slot_hours * tariff.price(sched.start_slot + i))
                .sum();
            let budget = (1.0 + config.cost_cap_slack) * reference_cost;
            let spend = s.accrued_cost + planned;
            if spend > budget + tol * (1.0 + budget.abs()) {
                out.push(ScheduleViolation {
                    kind: ScheduleViolationKind::CostCap,
                    session: Some(id.clone()),
                    slot: None,
                    amount: spend - budget,
                });
            }
        }
    }

    for k in from_slot..config.horizon_slots {
        let aggregate: f64 = schedules.values().map(|s| s.setpoint_at(k)).sum();
        let limit = signal.limit_kw[k];
        if aggregate > limit + tol * (1.0 + limit.abs()) {
            out.push(ScheduleViolation {
                kind: ScheduleViolationKind::AggregateLimit,
                session: None,
                slot: Some(k),
                amount: aggregate - limit,
            });
        }
    }
    out
}

/// Objective value of a set of schedules restricted to `[from_slot, horizon)`:
/// remaining energy cost plus the weighted worst-slot tracking deviation.
/// Comparable to [`ScheduleSolution::objective`] of a strict (non-relaxed)
/// re-solve starting at `from_slot`.
pub fn tail_objective(
    schedules: &BTreeMap<SessionId, LoadSchedule>,
    tariff: &Tariff,
    signal: &DsoSignal,
    config: &ControllerConfig,
    from_slot: Slot,
) -> f64 {
    let slot_hours = config.slot_hours();
    let mut cost = 0.0;
    for sched in schedules.values() {
        for k in from_slot.max(sched.start_slot)..sched.end_slot() {
            cost += sched.setpoint_at(k) * slot_hours * tariff.price(k);
        }
    }
    let mut worst = 0.0f64;
    for k in from_slot..config.horizon_slots {
        let aggregate: f64 = schedules.values().map(|s| s.setpoint_at(k)).sum();
        worst = worst.max(signal.weights[k] * (aggregate - signal.reference_kw[k]).abs());
    }
    cost + config.tracking_weight * worst
}
