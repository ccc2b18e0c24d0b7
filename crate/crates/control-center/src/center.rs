//! The control center: session lifecycle around the load-area controller,
//! schedule push, report ingestion with cost attribution, and an
//! event-sourced log from which the whole state can be replayed.

use crate::types::{
    CenterConfig, CenterError, CenterSocket, FinalSessionReport, PevProfile, Reservation,
};
use crate::wire::ScheduleMsg;
use lac::{
    pct_to_kwh, ChargingSession, Controller, ControllerEvent, DsoSignal, LacError, LoadSchedule,
    ReplanOutcome, SessionId, SessionStatus, Slot, SocketId, Tariff,
};
use plant::{amps_to_kw, setpoint_to_amps, MeterReading};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A metered draw this far (kW) from the commanded setpoint marks the plan
/// stale and requests a re-plan at the next tick. One ampere of quantization
/// (0.23 kW per phase) must stay below this, a tapering or absent vehicle
/// above it.
pub const DEVIATION_THRESHOLD_KW: f64 = 0.3;

/// Inputs the center persists; replaying them reproduces the center state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CenterEvent {
    ProfileRegistered { profile: PevProfile },
    ReservationPlaced { reservation: Reservation },
    RfidSwiped { slot: Slot, rfid: String },
    TariffUpdated { slot: Slot, tariff: Tariff },
    DsoUpdated { slot: Slot, update: DsoSignal },
    ReportDelivered { reading: MeterReading },
    Ticked { slot: Slot },
    SessionTerminated { slot: Slot, session: SessionId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub seq: u64,
    pub event: CenterEvent,
}

/// What an RFID swipe did.
#[derive(Debug, Clone, PartialEq)]
pub enum SwipeOutcome {
    /// A session started; `plan` carries its first schedules to push.
    Authenticated { session: SessionId, socket: SocketId, plan: TickOutcome },
    /// The card belonged to a running session: swiping again ends it.
    SessionEnded(Box<FinalSessionReport>),
}

/// What a tick (or tariff/signal change) produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickOutcome {
    pub slot: Slot,
    /// Fresh schedules to push, one per active session, empty if no re-plan
    /// happened.
    pub schedules: Vec<ScheduleMsg>,
    pub replanned: bool,
    /// Objective value of the fresh plan, when one was computed.
    pub objective: Option<f64>,
    /// Final-SoC targets had to be relaxed.
    pub relaxed: bool,
    /// Declared unmet energy per session when targets were relaxed (kWh).
    pub shortfall_kwh: BTreeMap<SessionId, f64>,
    /// The search hit its node budget; schedules are best-found.
    pub node_limited: bool,
    /// The planner could not produce any schedule; previous plans stay in
    /// force.
    pub planning_error: Option<String>,
}

/// Internal result of applying one event.
enum Applied {
    None,
    Swipe(SwipeOutcome),
    Tick(TickOutcome),
    Final(Box<FinalSessionReport>),
}

#[derive(Debug, Clone)]
struct SessionMeta {
    id: SessionId,
    rfid: String,
    socket: SocketId,
    start_slot: Slot,
    planned_departure_slot: Slot,
    last_cumulative_kwh: f64,
    last_report_slot: Option<Slot>,
    ended_slot: Option<Slot>,
}

/// Comparable digest of the center's state, for replay checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterSnapshot {
    pub now: Slot,
    pub next_session: u64,
    pub event_count: u64,
    pub reservations_used: Vec<bool>,
    pub sessions: Vec<SessionSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub id: SessionId,
    pub rfid: String,
    pub socket: SocketId,
    pub status: SessionStatus,
    pub soc_estimate_kwh: f64,
    pub accrued_cost: f64,
    pub metered_energy_kwh: f64,
    pub best_effort: bool,
    pub schedule: Option<LoadSchedule>,
}

#[derive(Debug, Clone)]
pub struct ControlCenter {
    controller: Controller,
    sockets: BTreeMap<SocketId, CenterSocket>,
    profiles: BTreeMap<String, PevProfile>,
    reservations: Vec<(Reservation, bool)>,
    sessions: BTreeMap<SessionId, SessionMeta>,
    /// Quantized power each pushed schedule promised per slot, kept for
    /// attributing unreported energy to the slots it was drawn in.
    pushed_kw: BTreeMap<SessionId, BTreeMap<Slot, f64>>,
    next_session: u64,
    log: Vec<EventLogRecord>,
}

impl ControlCenter {
    pub fn new(config: CenterConfig) -> Result<Self, CenterError> {
        let controller = Controller::new(
            config.controller,
            config.initial_tariff,
            config.initial_signal,
        )?;
        let sockets = config.sockets.into_iter().map(|s| (s.id.clone(), s)).collect();
        Ok(ControlCenter {
            controller,
            sockets,
            profiles: BTreeMap::new(),
            reservations: Vec::new(),
            sessions: BTreeMap::new(),
            pushed_kw: BTreeMap::new(),
            next_session: 1,
            log: Vec::new(),
        })
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn event_log(&self) -> &[EventLogRecord] {
        &self.log
    }

    /// Registers a vehicle so its RFID can reserve and authenticate.
    pub fn register_profile(&mut self, profile: PevProfile) -> Result<(), CenterError> {
        if self.profiles.contains_key(&profile.rfid) {
            return Err(CenterError::DuplicateRfid(profile.rfid));
        }
        self.handle(CenterEvent::ProfileRegistered { profile })?;
        Ok(())
    }

    /// Books a charging window. Fails when the window is empty, leaves the
    /// horizon, overlaps another booking on the socket, or the RFID is
    /// unknown.
    pub fn reserve(&mut self, reservation: Reservation) -> Result<(), CenterError> {
        self.validate_reservation(&reservation)?;
        self.handle(CenterEvent::ReservationPlaced { reservation })?;
        Ok(())
    }

    /// A card was presented at `slot`: starts a session against its
    /// reservation, or ends the session it already runs.
    pub fn rfid_swipe(&mut self, slot: Slot, rfid: &str) -> Result<SwipeOutcome, CenterError> {
        if !self.profiles.contains_key(rfid) {
            return Err(CenterError::UnknownRfid(rfid.to_owned()));
        }
        let running = self.active_session_for_rfid(rfid).cloned();
        if running.is_none() {
            // Authentication path: a covering, unused reservation must exist
            // before the event is committed to the log.
            self.find_reservation(rfid, slot).ok_or_else(|| {
                CenterError::NoValidReservation { rfid: rfid.to_owned(), slot }
            })?;
        }
        match self.handle(CenterEvent::RfidSwiped { slot, rfid: rfid.to_owned() })? {
            Applied::Swipe(outcome) => Ok(outcome),
            _ => unreachable!("swipe events yield swipe outcomes"),
        }
    }

    /// Prices changed from `slot` on; re-plans immediately.
    pub fn apply_tariff(&mut self, slot: Slot, tariff: Tariff) -> Result<TickOutcome, CenterError> {
        if tariff.len() < self.controller.config().horizon_slots {
            return Err(CenterError::Planning(LacError::HorizonTooShort {
                what: "tariff",
                needed: self.controller.config().horizon_slots,
                have: tariff.len(),
            }));
        }
        match self.handle(CenterEvent::TariffUpdated { slot, tariff })? {
            Applied::Tick(outcome) => Ok(outcome),
            _ => unreachable!("tariff events yield tick outcomes"),
        }
    }

    /// The grid operator revised its signal; re-plans immediately.
    pub fn apply_dso_signal(
        &mut self,
        slot: Slot,
        update: DsoSignal,
    ) -> Result<TickOutcome, CenterError> {
        match self.handle(CenterEvent::DsoUpdated { slot, update })? {
            Applied::Tick(outcome) => Ok(outcome),
            _ => unreachable!("signal events yield tick outcomes"),
        }
    }

    /// Feeds one delivered meter report. Unknown sessions are logged and
    /// ignored (the log keeps the evidence; the state stays untouched).
    pub fn ingest_report(&mut self, reading: MeterReading) -> Result<(), CenterError> {
        self.handle(CenterEvent::ReportDelivered { reading })?;
        Ok(())
    }

    /// Advances the clock to `slot` and re-plans when due (periodically or
    /// because a deviation/report requested it).
    pub fn tick(&mut self, slot: Slot) -> Result<TickOutcome, CenterError> {
        match self.handle(CenterEvent::Ticked { slot })? {
            Applied::Tick(outcome) => Ok(outcome),
            _ => unreachable!("tick events yield tick outcomes"),
        }
    }

    /// Ends a session at `slot` and returns its final report (this path is
    /// reliable — it does not ride the lossy report channel).
    pub fn terminate(
        &mut self,
        slot: Slot,
        session: &SessionId,
    ) -> Result<FinalSessionReport, CenterError> {
        if !self
            .sessions
            .get(session)
            .is_some_and(|m| m.ended_slot.is_none())
        {
            return Err(CenterError::UnknownSession(session.clone()));
        }
        match self.handle(CenterEvent::SessionTerminated { slot, session: session.clone() })? {
            Applied::Final(report) => Ok(*report),
            _ => unreachable!("terminate events yield final reports"),
        }
    }

    /// Active sessions whose planned departure is at or before `slot`; the
    /// caller is expected to terminate them.
    pub fn due_departures(&self, slot: Slot) -> Vec<SessionId> {
        self.sessions
            .values()
            .filter(|m| m.ended_slot.is_none() && m.planned_departure_slot <= slot)
            .map(|m| m.id.clone())
            .collect()
    }

    /// Rebuilds a center from its configuration and persisted event log.
    pub fn replay(
        config: CenterConfig,
        records: &[EventLogRecord],
    ) -> Result<Self, CenterError> {
        let mut center = ControlCenter::new(config)?;
        for record in records {
            center.handle(record.event.clone())?;
        }
        Ok(center)
    }

    /// Comparable digest of everything the center believes right now.
    pub fn snapshot(&self) -> CenterSnapshot {
        let sessions = self
            .sessions
            .values()
            .map(|meta| {
                let managed = self
                    .controller
                    .session(&meta.id)
                    .expect("every center session is managed");
                SessionSnapshot {
                    id: meta.id.clone(),
                    rfid: meta.rfid.clone(),
                    socket: meta.socket.clone(),
                    status: managed.session.status,
                    soc_estimate_kwh: managed.session.soc_kwh,
                    accrued_cost: managed.session.accrued_cost,
                    metered_energy_kwh: managed.metered_energy_kwh,
                    best_effort: managed.best_effort,
                    schedule: managed.schedule.clone(),
                }
            })
            .collect();
        CenterSnapshot {
            now: self.controller.now(),
            next_session: self.next_session,
            event_count: self.log.len() as u64,
            reservations_used: self.reservations.iter().map(|(_, used)| *used).collect(),
            sessions,
        }
    }

    // ------------------------------------------------------------------
    // Event application (shared by the live path and replay).
    // ------------------------------------------------------------------

    fn handle(&mut self, event: CenterEvent) -> Result<Applied, CenterError> {
        let applied = match &event {
            CenterEvent::ProfileRegistered { profile } => {
                self.profiles.insert(profile.rfid.clone(), profile.clone());
                Applied::None
            }
            CenterEvent::ReservationPlaced { reservation } => {
                self.reservations.push((reservation.clone(), false));
                Applied::None
            }
            CenterEvent::RfidSwiped { slot, rfid } => {
                Applied::Swipe(self.on_swipe(*slot, rfid)?)
            }
            CenterEvent::TariffUpdated { slot, tariff } => {
                let outcome = self.drive_controller(
                    *slot,
                    ControllerEvent::TariffUpdate { slot: *slot, tariff: tariff.clone() },
                )?;
                Applied::Tick(outcome)
            }
            CenterEvent::DsoUpdated { slot, update } => {
                let outcome = self.drive_controller(
                    *slot,
                    ControllerEvent::DsoUpdate { slot: *slot, update: update.clone() },
                )?;
                Applied::Tick(outcome)
            }
            CenterEvent::ReportDelivered { reading } => {
                self.on_report(reading.clone());
                Applied::None
            }
            CenterEvent::Ticked { slot } => {
                let outcome = self
                    .drive_controller(*slot, ControllerEvent::PeriodicTick { slot: *slot })?;
                Applied::Tick(outcome)
            }
            CenterEvent::SessionTerminated { slot, session } => {
                Applied::Final(Box::new(self.on_terminate(*slot, &session.clone())?))
            }
        };
        self.log.push(EventLogRecord { seq: self.log.len() as u64, event });
        Ok(applied)
    }

    fn validate_reservation(&self, r: &Reservation) -> Result<(), CenterError> {
        if !self.profiles.contains_key(&r.rfid) {
            return Err(CenterError::UnknownRfid(r.rfid.clone()));
        }
        if !self.sockets.contains_key(&r.socket) {
            return Err(CenterError::UnknownSocket(r.socket.clone()));
        }
        if r.from_slot >= r.departure_slot
            || r.departure_slot > self.controller.config().horizon_slots
        {
            return Err(CenterError::InvalidWindow { from: r.from_slot, to: r.departure_slot });
        }
        let pct_ok = (0.0..=100.0).contains(&r.min_soc_pct)
            && r.min_soc_pct <= r.max_soc_pct
            && r.max_soc_pct <= 100.0
            && r.min_soc_pct <= r.arrival_soc_pct
            && r.arrival_soc_pct <= r.max_soc_pct
            && r.min_soc_pct <= r.target_soc_pct
            && r.target_soc_pct <= r.max_soc_pct;
        if !pct_ok {
            return Err(CenterError::InvalidSocPercentages);
        }
        let overlaps = |a0: Slot, a1: Slot, b0: Slot, b1: Slot| a0 < b1 && b0 < a1;
        for (other, used) in &self.reservations {
            if *used || other.socket != r.socket {
                continue;
            }
            if overlaps(r.from_slot, r.departure_slot, other.from_slot, other.departure_slot) {
                return Err(CenterError::SocketBusy { socket: r.socket.clone() });
            }
        }
        for meta in self.sessions.values() {
            if meta.ended_slot.is_none()
                && meta.socket == r.socket
                && overlaps(r.from_slot, r.departure_slot, meta.start_slot, meta.planned_departure_slot)
            {
                return Err(CenterError::SocketBusy { socket: r.socket.clone() });
            }
        }
        Ok(())
    }

    fn active_session_for_rfid(&self, rfid: &str) -> Option<&SessionId> {
        self.sessions
            .values()
            .find(|m| m.ended_slot.is_none() && m.rfid == rfid)
            .map(|m| &m.id)
    }

    fn find_reservation(&self, rfid: &str, slot: Slot) -> Option<usize> {
        self.reservations.iter().position(|(r, used)| {
            !used && r.rfid == rfid && r.from_slot <= slot && slot < r.departure_slot
        })
    }

    fn on_swipe(&mut self, slot: Slot, rfid: &str) -> Result<SwipeOutcome, CenterError> {
        if let Some(session) = self.active_session_for_rfid(rfid).cloned() {
            let report = self.on_terminate(slot, &session)?;
            return Ok(SwipeOutcome::SessionEnded(Box::new(report)));
        }
        let idx = self
            .find_reservation(rfid, slot)
            .ok_or_else(|| CenterError::NoValidReservation { rfid: rfid.to_owned(), slot })?;
        let profile = self.profiles.get(rfid).expect("checked by caller").clone();
        let reservation = self.reservations[idx].0.clone();
        self.reservations[idx].1 = true;

        let id = SessionId(format!("S{:03}", self.next_session));
        self.next_session += 1;
        let capacity = profile.assumed_capacity_kwh;
        let session = ChargingSession {
            id: id.clone(),
            socket: reservation.socket.clone(),
            max_power_kw: profile.max_power_kw,
            phases: profile.phases,
            min_on_fraction: plant::min_on_fraction_for(profile.max_power_kw, profile.phases),
            loss_factor: profile.assumed_loss_factor,
            assumed_capacity_kwh: capacity,
            soc_kwh: pct_to_kwh(reservation.arrival_soc_pct, capacity),
            min_soc_kwh: pct_to_kwh(reservation.min_soc_pct, capacity),
            max_soc_kwh: pct_to_kwh(reservation.max_soc_pct, capacity),
            target_soc_kwh: pct_to_kwh(reservation.target_soc_pct, capacity),
            start_slot: slot,
            departure_slot: reservation.departure_slot,
            accrued_cost: 0.0,
            reference_cost: None,
            status: SessionStatus::Active,
        };
        session.validate().map_err(LacError::Session)?;
        self.sessions.insert(
            id.clone(),
            SessionMeta {
                id: id.clone(),
                rfid: rfid.to_owned(),
                socket: reservation.socket.clone(),
                start_slot: slot,
                planned_departure_slot: reservation.departure_slot,
                last_cumulative_kwh: 0.0,
                last_report_slot: None,
                ended_slot: None,
            },
        );
        let outcome = self.drive_controller(slot, ControllerEvent::NewSession { session })?;
        Ok(SwipeOutcome::Authenticated { session: id, socket: reservation.socket, plan: outcome })
    }

    /// Runs one controller event, turning a re-plan into schedule messages
    /// and a planner dead-end into a soft error.
    fn drive_controller(
        &mut self,
        slot: Slot,
        event: ControllerEvent,
    ) -> Result<TickOutcome, CenterError> {
        match self.controller.apply_event(event) {
            Ok(Some(replan)) => {
                let schedules = self.render_schedules(&replan);
                Ok(TickOutcome {
                    slot,
                    schedules,
                    replanned: true,
                    objective: Some(replan.objective),
                    relaxed: replan.relaxed,
                    shortfall_kwh: replan.shortfall_kwh.clone(),
                    node_limited: replan.node_limited,
                    planning_error: None,
                })
            }
            Ok(None) => Ok(TickOutcome { slot, ..TickOutcome::default() }),
            Err(err @ LacError::StillInfeasible) => {
                log::warn!("slot {slot}: planner found no feasible schedule, keeping previous plans");
                Ok(TickOutcome {
                    slot,
                    planning_error: Some(err.to_string()),
                    ..TickOutcome::default()
                })
            }
            Err(other) => Err(CenterError::Planning(other)),
        }
    }

    /// Converts a re-plan into wire messages and records the quantized
    /// power each session was promised (for later energy attribution).
    fn render_schedules(&mut self, replan: &ReplanOutcome) -> Vec<ScheduleMsg> {
        let mut msgs = Vec::new();
        for (id, sched) in &replan.schedules {
            let meta = match self.sessions.get(id) {
                Some(meta) => meta,
                None => continue,
            };
            let socket = &self.sockets[&meta.socket];
            let amps: Vec<u32> = sched
                .setpoints_kw
                .iter()
                .map(|&kw| setpoint_to_amps(kw, socket.phases).min(socket.max_amps))
                .collect();
            let promised = self.pushed_kw.entry(id.clone()).or_default();
            promised.split_off(&sched.start_slot);
            for (i, &a) in amps.iter().enumerate() {
                promised.insert(sched.start_slot + i, amps_to_kw(a, socket.phases));
            }
            msgs.push(ScheduleMsg {
                session: id.clone(),
                socket: meta.socket.clone(),
                from_slot: sched.start_slot,
                amps,
                setpoints_kw: sched.setpoints_kw.clone(),
            });
        }
        msgs
    }

    fn on_report(&mut self, reading: MeterReading) {
        let Some(meta) = self.sessions.get_mut(&reading.session) else {
            log::warn!(
                "slot {}: report for unknown session {} ignored",
                reading.slot,
                reading.session
            );
            return;
        };
        if meta.ended_slot.is_some() {
            log::warn!(
                "slot {}: report for ended session {} ignored",
                reading.slot,
                reading.session
            );
            return;
        }
        if meta.last_report_slot.is_some_and(|last| reading.slot <= last) {
            // Duplicate or out-of-order delivery; the first copy already
            // settled this slot's energy and cost.
            log::debug!(
                "slot {}: stale report for session {} ignored",
                reading.slot,
                reading.session
            );
            return;
        }

        // Attribute the cumulative energy to slots. The reported slot's own
        // energy is exact; anything unaccounted since the last report is
        // spread over the silent gap in proportion to the power the pushed
        // schedules promised there.
        let mut slot_energies: Vec<(Slot, f64)> = Vec::new();
        let unaccounted = reading.cumulative_energy_kwh
            - meta.last_cumulative_kwh
            - reading.slot_energy_kwh;
        let gap_start = meta.last_report_slot.map_or(meta.start_slot, |s| s + 1);
        if unaccounted > 1e-12 && reading.slot > gap_start {
            let gap: Vec<Slot> = (gap_start..reading.slot).collect();
            let weights: Vec<f64> = gap
                .iter()
                .map(|k| {
                    self.pushed_kw
                        .get(&reading.session)
                        .and_then(|m| m.get(k))
                        .copied()
                        .unwrap_or(0.0)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            for (k, w) in gap.iter().zip(&weights) {
                let share = if total > 0.0 { w / total } else { 1.0 / gap.len() as f64 };
                slot_energies.push((*k, unaccounted * share));
            }
            slot_energies.push((reading.slot, reading.slot_energy_kwh));
        } else {
            // No silent gap: fold any residual into the reported slot so the
            // cost attribution never loses energy.
            slot_energies.push((reading.slot, reading.slot_energy_kwh + unaccounted.max(0.0)));
        }
        meta.last_cumulative_kwh = reading.cumulative_energy_kwh;
        meta.last_report_slot = Some(reading.slot);

        let session_id = reading.session.clone();
        let deviation = (reading.metered_kw - reading.commanded_kw).abs();
        self.controller
            .apply_event(ControllerEvent::MeterFeedback {
                session: session_id,
                slot: reading.slot,
                cumulative_energy_kwh: reading.cumulative_energy_kwh,
                slot_energies,
            })
            .expect("meter feedback never fails");
        if deviation > DEVIATION_THRESHOLD_KW {
            log::debug!(
                "slot {}: session {} deviates {deviation:.3} kW from plan, re-plan requested",
                reading.slot,
                reading.session
            );
            self.controller.request_replan();
        }
    }

    fn on_terminate(
        &mut self,
        slot: Slot,
        session: &SessionId,
    ) -> Result<FinalSessionReport, CenterError> {
        let meta = self
            .sessions
            .get_mut(session)
            .filter(|m| m.ended_slot.is_none())
            .ok_or_else(|| CenterError::UnknownSession(session.clone()))?;
        meta.ended_slot = Some(slot);
        let meta = self.sessions.get(session).expect("just updated").clone();
        self.controller
            .apply_event(ControllerEvent::SessionEnd { session: session.clone(), slot })
            .expect("session end never fails");
        let managed = self.controller.session(session).expect("managed session");
        Ok(FinalSessionReport {
            session: session.clone(),
            rfid: meta.rfid,
            socket: meta.socket,
            start_slot: meta.start_slot,
            end_slot: slot,
            planned_departure_slot: meta.planned_departure_slot,
            metered_energy_kwh: managed.metered_energy_kwh,
            accrued_cost: managed.session.accrued_cost,
            final_soc_estimate_kwh: managed.session.soc_kwh,
            target_soc_kwh: managed.session.target_soc_kwh,
            best_effort: managed.best_effort,
        })
    }
}
