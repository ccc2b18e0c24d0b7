//! The load-area controller proper: holds session state between solves,
//! advances state-of-charge estimates slot by slot, folds in metering
//! feedback, and re-plans in reaction to events.
//!
//! Time model: `now` is the slot currently being executed, and every
//! session's `soc_kwh` is the estimate at the *start* of `now`. Crossing a
//! slot boundary freezes the level that was commanded for the elapsed slot
//! and advances the estimate — by the metered anchor when a report covered
//! that slot, by the planned-level prediction otherwise. Because reports
//! carry *cumulative* energy, one delivered report re-anchors the estimate
//! even when earlier reports were lost.

use crate::problem::{build_problem, solve_schedules, LacError};
use crate::session::{ChargingSession, SessionId, SessionStatus, Slot};
use crate::types::{ControllerConfig, DsoSignal, LoadSchedule, Tariff};
use milp_core::SolveLimits;
use std::collections::BTreeMap;

/// Per-session bookkeeping the controller keeps between solves.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagedSession {
    /// The session as the next solve will see it (`soc_kwh` = estimate at
    /// the start of the controller's current slot).
    pub session: ChargingSession,
    /// SoC estimate at plug-in time; metered anchors build on this.
    pub arrival_soc_kwh: f64,
    /// Latest cumulative metered energy (kWh, grid side).
    pub metered_energy_kwh: f64,
    /// Slot covered by the most recent delivered report.
    pub last_report_slot: Option<Slot>,
    /// Current plan for this session.
    pub schedule: Option<LoadSchedule>,
    /// The latest solve could not meet this session's final-SoC target and
    /// declared a shortfall instead.
    pub best_effort: bool,
    /// Levels actually commanded for elapsed slots; never rewritten.
    pub commanded: BTreeMap<Slot, f64>,
    /// End-of-slot SoC implied by the latest report, consumed when the
    /// controller crosses that slot boundary.
    anchor: Option<(Slot, f64)>,
}

/// Inputs that drive the controller.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerEvent {
    /// A vehicle authenticated; `session.start_slot` is the current slot.
    NewSession { session: ChargingSession },
    /// Metering for `slot` arrived: cumulative grid-side energy since
    /// plug-in plus the per-slot energies used for cost attribution.
    MeterFeedback {
        session: SessionId,
        slot: Slot,
        cumulative_energy_kwh: f64,
        slot_energies: Vec<(Slot, f64)>,
    },
    /// Prices changed from `slot` on.
    TariffUpdate { slot: Slot, tariff: Tariff },
    /// The grid operator revised its reference/limit/weights.
    DsoUpdate { slot: Slot, update: DsoSignal },
    /// A new slot began.
    PeriodicTick { slot: Slot },
    /// The vehicle left (or was told to leave) at `slot`.
    SessionEnd { session: SessionId, slot: Slot },
}

/// What a re-plan produced, for transport to the charging stations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplanOutcome {
    pub slot: Slot,
    pub objective: f64,
    pub relaxed: bool,
    pub node_limited: bool,
    pub schedules: BTreeMap<SessionId, LoadSchedule>,
    pub shortfall_kwh: BTreeMap<SessionId, f64>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    tariff: Tariff,
    signal: DsoSignal,
    limits: SolveLimits,
    sessions: BTreeMap<SessionId, ManagedSession>,
    now: Slot,
    last_replan: Option<Slot>,
    replan_requested: bool,
}

impl Controller {
    pub fn new(
        config: ControllerConfig,
        tariff: Tariff,
        signal: DsoSignal,
    ) -> Result<Self, LacError> {
        Self::with_limits(config, tariff, signal, SolveLimits::default())
    }

    pub fn with_limits(
        config: ControllerConfig,
        tariff: Tariff,
        signal: DsoSignal,
        limits: SolveLimits,
    ) -> Result<Self, LacError> {
        let horizon = config.horizon_slots;
        for (what, len) in [
            ("tariff", tariff.len()),
            ("reference profile", signal.reference_kw.len()),
            ("aggregate limit", signal.limit_kw.len()),
            ("tracking weights", signal.weights.len()),
        ] {
            if len < horizon {
                return Err(LacError::HorizonTooShort { what, needed: horizon, have: len });
            }
        }
        Ok(Controller {
            config,
            tariff,
            signal,
            limits,
            sessions: BTreeMap::new(),
            now: 0,
            last_replan: None,
            replan_requested: false,
        })
    }

    pub fn now(&self) -> Slot {
        self.now
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn tariff(&self) -> &Tariff {
        &self.tariff
    }

    pub fn signal(&self) -> &DsoSignal {
        &self.signal
    }

    pub fn session(&self, id: &SessionId) -> Option<&ManagedSession> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &ManagedSession> {
        self.sessions.values()
    }

    /// Asks for a re-plan at the next tick (e.g. after a large deviation
    /// between commanded and metered power).
    pub fn request_replan(&mut self) {
        self.replan_requested = true;
    }

    pub fn replan_pending(&self) -> bool {
        self.replan_requested
    }

    /// Level commanded (or currently planned) for `slot`: frozen history for
    /// elapsed slots, the live schedule otherwise. Zero when unknown.
    pub fn commanded_level(&self, id: &SessionId, slot: Slot) -> f64 {
        let Some(m) = self.sessions.get(id) else { return 0.0 };
        if slot < self.now {
            m.commanded.get(&slot).copied().unwrap_or(0.0)
        } else {
            m.schedule.as_ref().map_or(0.0, |s| s.level_at(slot))
        }
    }

    /// Feeds one event through the controller. `Ok(Some(..))` carries fresh
    /// schedules to push to the stations.
    ///
    /// On [`LacError::StillInfeasible`] the previous schedules stay in force
    /// (and every active session is flagged best-effort); the caller decides
    /// how loudly to complain.
    pub fn apply_event(
        &mut self,
        event: ControllerEvent,
    ) -> Result<Option<ReplanOutcome>, LacError> {
        match event {
            ControllerEvent::NewSession { session } => {
                self.advance_to(session.start_slot);
                session.validate()?;
                let managed = ManagedSession {
                    arrival_soc_kwh: session.soc_kwh,
                    metered_energy_kwh: 0.0,
                    last_report_slot: None,
                    schedule: None,
                    best_effort: false,
                    commanded: BTreeMap::new(),
                    anchor: None,
                    session,
                };
                self.sessions.insert(managed.session.id.clone(), managed);
                self.replan()
            }
            ControllerEvent::MeterFeedback { session, slot, cumulative_energy_kwh, slot_energies } => {
                self.ingest_feedback(&session, slot, cumulative_energy_kwh, &slot_energies);
                Ok(None)
            }
            ControllerEvent::TariffUpdate { slot, tariff } => {
                self.advance_to(slot);
                if tariff.len() < self.config.horizon_slots {
                    return Err(LacError::HorizonTooShort {
                        what: "tariff",
                        needed: self.config.horizon_slots,
                        have: tariff.len(),
                    });
                }
                self.tariff = tariff;
                self.replan()
            }
            ControllerEvent::DsoUpdate { slot, update } => {
                self.advance_to(slot);
                self.signal.merge_update(&update);
                self.replan()
            }
            ControllerEvent::PeriodicTick { slot } => {
                self.advance_to(slot);
                let period = self.config.replan_period_slots;
                let due = self.replan_requested
                    || (period > 0
                        && self.last_replan.map_or(true, |last| self.now >= last + period));
                if due && self.last_replan != Some(self.now) {
                    self.replan()
                } else {
                    Ok(None)
                }
            }
            ControllerEvent::SessionEnd { session, slot } => {
                self.advance_to(slot);
                if let Some(m) = self.sessions.get_mut(&session) {
                    m.session.status = SessionStatus::Terminated;
                    m.schedule = None;
                }
                Ok(None)
            }
        }
    }

    /// Freezes commanded levels and rolls SoC estimates forward to `slot`.
    fn advance_to(&mut self, slot: Slot) {
        let slot_hours = self.config.slot_hours();
        while self.now < slot {
            let elapsed = self.now;
            for m in self.sessions.values_mut() {
                if !m.session.covers_slot(elapsed) {
                    continue;
                }
                let level = m.schedule.as_ref().map_or(0.0, |s| s.level_at(elapsed));
                m.commanded.insert(elapsed, level);
                let s = &mut m.session;
                match m.anchor {
                    Some((anchored, soc)) if anchored == elapsed => s.soc_kwh = soc,
                    _ => {
                        s.soc_kwh = (s.soc_kwh + s.slot_gain_kwh(slot_hours) * level)
                            .clamp(s.min_soc_kwh, s.max_soc_kwh)
                    }
                }
            }
            self.now += 1;
        }
    }

    fn ingest_feedback(
        &mut self,
        id: &SessionId,
        slot: Slot,
        cumulative_energy_kwh: f64,
        slot_energies: &[(Slot, f64)],
    ) {
        let Some(m) = self.sessions.get_mut(id) else {
            // Unknown or already-forgotten session; the caller logs these.
            return;
        };
        for &(k, energy) in slot_energies {
            if k < self.tariff.len() {
                m.session.accrued_cost += energy * self.tariff.price(k);
            }
        }
        m.metered_energy_kwh = cumulative_energy_kwh;
        m.last_report_slot = Some(slot);
        let s = &mut m.session;
        let battery = m.arrival_soc_kwh + cumulative_energy_kwh * (1.0 - s.loss_factor);
        let end_of_slot = battery.clamp(s.min_soc_kwh, s.max_soc_kwh);
        m.anchor = Some((slot, end_of_slot));
        if slot < self.now {
            // The report lags the clock (e.g. replayed input): re-derive the
            // current estimate from the anchor and the frozen commands.
            let slot_hours = self.config.slot_hours();
            let mut x = end_of_slot;
            for k in (slot + 1)..self.now {
                x += s.slot_gain_kwh(slot_hours) * m.commanded.get(&k).copied().unwrap_or(0.0);
            }
            s.soc_kwh = x.clamp(s.min_soc_kwh, s.max_soc_kwh);
        }
    }

    fn replan(&mut self) -> Result<Option<ReplanOutcome>, LacError> {
        let slot = self.now;
        let active: Vec<ChargingSession> = self
            .sessions
            .values()
            .filter(|m| m.session.status == SessionStatus::Active && m.session.departure_slot > slot)
            .map(|m| m.session.clone())
            .collect();
        if active.is_empty() {
            self.last_replan = Some(slot);
            self.replan_requested = false;
            return Ok(None);
        }
        let built = build_problem(&active, &self.tariff, &self.signal, &self.config, slot)?;
        let solution = match solve_schedules(&built, &self.config, &self.limits) {
            Ok(solution) => solution,
            Err(LacError::StillInfeasible) => {
                // Keep flying on the previous schedules rather than dropping
                // every load; everything active is best-effort now.
                for m in self.sessions.values_mut() {
                    if m.session.status == SessionStatus::Active {
                        m.best_effort = true;
                    }
                }
                self.last_replan = Some(slot);
                self.replan_requested = false;
                return Err(LacError::StillInfeasible);
            }
            Err(other) => return Err(other),
        };
        let slot_hours = self.config.slot_hours();
        for (id, sched) in &solution.schedules {
            let m = self.sessions.get_mut(id).expect("scheduled session is managed");
            if m.session.reference_cost.is_none() {
                let planned: f64 = sched
                    .setpoints_kw
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| p * slot_hours * self.tariff.price(sched.start_slot + i))
                    .sum();
                m.session.reference_cost = Some(planned);
            }
            m.best_effort = solution.shortfall_kwh.contains_key(id);
            m.schedule = Some(sched.clone());
        }
        self.last_replan = Some(slot);
        self.replan_requested = false;
        Ok(Some(ReplanOutcome {
            slot,
            objective: solution.objective,
            relaxed: solution.relaxed,
            node_limited: solution.node_limited,
            schedules: solution.schedules,
            shortfall_kwh: solution.shortfall_kwh,
        }))
    }
}
