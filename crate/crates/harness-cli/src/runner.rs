//! Drives one scenario end to end: the control center plans, the simulated
//! stations execute, meter reports ride the lossy channel back, and every
//! schedule the center pushes is independently re-checked against the
//! constraints it claims to satisfy.

use crate::scenario::{EventAction, Scenario, VehicleSpec};
use crate::stats::{compute_tracking_stats, TrackingStats};
use control_center::{
    CenterError, ControlCenter, FinalSessionReport, SwipeOutcome, TickOutcome,
};
use lac::{
    tail_objective, verify_schedules, ChargingSession, LoadSchedule, SessionId, SessionStatus,
    Slot, SocketId,
};
use plant::{BatteryState, LossyChannel, MeterReading, Plant, PlantError, SocketConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Tolerance for the independent schedule re-check (absolute, scaled by the
/// bound's magnitude inside the checker).
const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Center(#[from] CenterError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("scenario references vehicle {0:?} that is not declared under vehicles")]
    UnknownVehicle(String),
}

/// One row of the per-slot output series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRow {
    pub slot: Slot,
    pub price_per_kwh: f64,
    pub reference_kw: f64,
    pub limit_kw: f64,
    /// Aggregate setpoint the center had in force while the slot executed.
    pub commanded_kw: f64,
    /// Aggregate power the stations actually applied (metered).
    pub applied_kw: f64,
    /// Sum of the center's SoC estimates at the start of the slot (kWh).
    pub soc_estimate_kwh: f64,
    /// Sum of the true battery states at the end of the slot (kWh).
    pub soc_true_kwh: f64,
    pub active_sessions: usize,
}

/// Final accounting for one charging session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRow {
    pub session: String,
    pub rfid: String,
    pub socket: String,
    pub start_slot: Slot,
    pub end_slot: Slot,
    pub planned_departure_slot: Slot,
    pub target_soc_kwh: f64,
    pub final_soc_estimate_kwh: f64,
    pub final_soc_true_kwh: f64,
    pub final_soc_true_pct: f64,
    /// Energy the center settled from meter reports (kWh).
    pub metered_energy_kwh: f64,
    /// Energy the station actually delivered (ground truth, kWh).
    pub plant_energy_kwh: f64,
    pub accrued_cost: f64,
    pub best_effort: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDump {
    pub from_slot: Slot,
    pub setpoints_kw: Vec<f64>,
    pub amps: Vec<u32>,
}

/// One line of the run's event journal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventRecord {
    SessionStart {
        slot: Slot,
        session: String,
        rfid: String,
        socket: String,
    },
    Replan {
        slot: Slot,
        /// What prompted the solve: session_start, periodic, dso_update or
        /// tariff_update.
        trigger: String,
        objective: Option<f64>,
        /// Remaining-horizon objective of the plan that was in force before
        /// this solve, evaluated on the current prices/signal.
        previous_tail_objective: Option<f64>,
        relaxed: bool,
        node_limited: bool,
        shortfall_kwh: f64,
        schedules: BTreeMap<String, ScheduleDump>,
    },
    SignalUpdate {
        slot: Slot,
        effective_from_slot: Slot,
    },
    PriceUpdate {
        slot: Slot,
    },
    SessionEnd {
        slot: Slot,
        session: String,
        final_soc_estimate_kwh: f64,
        final_soc_true_pct: f64,
        metered_energy_kwh: f64,
        accrued_cost: f64,
        best_effort: bool,
    },
    PlanningError {
        slot: Slot,
        error: String,
    },
    Violation {
        slot: Slot,
        description: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChannelSummary {
    pub reports_sent: u64,
    pub reports_dropped: u64,
}

#[derive(Debug)]
pub struct RunResult {
    pub scenario_name: String,
    pub horizon: usize,
    pub timeseries: Vec<SlotRow>,
    pub sessions: Vec<SessionRow>,
    pub events: Vec<EventRecord>,
    /// Human-readable descriptions of every re-check failure (empty = all
    /// pushed schedules honored their constraints).
    pub violations: Vec<String>,
    /// Tracking statistics over slots with at least one active session.
    pub tracking: Option<TrackingStats>,
    pub channel: ChannelSummary,
    /// The center in its final state, for replay/equality checks.
    pub center: ControlCenter,
}

impl RunResult {
    /// True when the run kept every invariant it checks online.
    pub fn invariants_held(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn replans(&self) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(|e| matches!(e, EventRecord::Replan { .. }))
    }
}

struct SessionTracking {
    rfid: String,
    socket: SocketId,
    last_reading: Option<MeterReading>,
}

/// Runs a scenario to completion. `seed_override` replaces the scenario's
/// channel seed (used for seed sweeps over the same scenario).
pub fn run_scenario(scenario: &Scenario, seed_override: Option<u64>) -> Result<RunResult, RunError> {
    let horizon = scenario.config.horizon_slots;
    let mut center = ControlCenter::new(scenario.center_config())?;
    for vehicle in &scenario.vehicles {
        center.register_profile(
            scenario.profile_for(&vehicle.rfid).expect("vehicle listed"),
        )?;
    }
    for reservation in scenario.center_reservations() {
        center.reserve(reservation)?;
    }
    let plant = Plant::new(
        scenario.config.slot_minutes,
        scenario
            .sockets
            .iter()
            .map(|s| SocketConfig {
                id: SocketId::from(s.id.as_str()),
                phases: s.phases,
                max_amps: s.max_amps,
                quantize: s.quantize,
            })
            .collect(),
    );
    let seed = seed_override.unwrap_or(scenario.channel.seed);
    let channel = LossyChannel::new(scenario.channel.loss_probability, seed);

    let mut run = Runner {
        scenario,
        center,
        plant,
        channel,
        live: BTreeMap::new(),
        timeseries: Vec::with_capacity(horizon),
        sessions: Vec::new(),
        events: Vec::new(),
        violations: Vec::new(),
    };

    let mut event_cursor = 0usize;
    for slot in 0..horizon {
        run.process_departures(slot)?;
        while event_cursor < scenario.events.len() && scenario.events[event_cursor].slot == slot {
            let action = scenario.events[event_cursor].action.clone();
            run.process_action(slot, &action)?;
            event_cursor += 1;
        }
        run.periodic_tick(slot)?;
        run.execute_slot(slot);
    }
    run.process_departures(horizon)?;

    let mask: Vec<bool> = run.timeseries.iter().map(|r| r.active_sessions > 0).collect();
    let commanded: Vec<f64> = run.timeseries.iter().map(|r| r.commanded_kw).collect();
    let applied: Vec<f64> = run.timeseries.iter().map(|r| r.applied_kw).collect();
    let tracking = compute_tracking_stats(&commanded, &applied, Some(&mask)).ok();

    Ok(RunResult {
        scenario_name: scenario.name.clone(),
        horizon,
        timeseries: run.timeseries,
        sessions: run.sessions,
        events: run.events,
        violations: run.violations,
        tracking,
        channel: ChannelSummary {
            reports_sent: run.channel.sent(),
            reports_dropped: run.channel.dropped(),
        },
        center: run.center,
    })
}

struct Runner<'a> {
    scenario: &'a Scenario,
    center: ControlCenter,
    plant: Plant,
    channel: LossyChannel,
    live: BTreeMap<SessionId, SessionTracking>,
    timeseries: Vec<SlotRow>,
    sessions: Vec<SessionRow>,
    events: Vec<EventRecord>,
    violations: Vec<String>,
}

impl Runner<'_> {
    fn process_departures(&mut self, slot: Slot) -> Result<(), RunError> {
        for id in self.center.due_departures(slot) {
            self.end_session(slot, &id)?;
        }
        Ok(())
    }

    fn end_session(&mut self, slot: Slot, id: &SessionId) -> Result<(), RunError> {
        // Session teardown is transactional in a real station: the closing
        // meter read does not ride the lossy report channel. Re-delivering
        // is safe — the center drops reports it has already settled.
        if let Some(tracking) = self.live.get(id) {
            if let Some(reading) = tracking.last_reading.clone() {
                self.center.ingest_report(reading)?;
            }
        }
        let report = self.center.terminate(slot, id)?;
        let tracking = self.live.remove(id).expect("live session");
        let vehicle = self.plant.unplug(&tracking.socket)?;
        self.record_session_end(slot, &report, &tracking, &vehicle.battery, vehicle.cumulative_energy_kwh);
        Ok(())
    }

    fn record_session_end(
        &mut self,
        slot: Slot,
        report: &FinalSessionReport,
        tracking: &SessionTracking,
        battery: &BatteryState,
        plant_energy_kwh: f64,
    ) {
        self.events.push(EventRecord::SessionEnd {
            slot,
            session: report.session.to_string(),
            final_soc_estimate_kwh: report.final_soc_estimate_kwh,
            final_soc_true_pct: battery.soc_pct(),
            metered_energy_kwh: report.metered_energy_kwh,
            accrued_cost: report.accrued_cost,
            best_effort: report.best_effort,
        });
        self.sessions.push(SessionRow {
            session: report.session.to_string(),
            rfid: tracking.rfid.clone(),
            socket: tracking.socket.to_string(),
            start_slot: report.start_slot,
            end_slot: report.end_slot,
            planned_departure_slot: report.planned_departure_slot,
            target_soc_kwh: report.target_soc_kwh,
            final_soc_estimate_kwh: report.final_soc_estimate_kwh,
            final_soc_true_kwh: battery.soc_kwh,
            final_soc_true_pct: battery.soc_pct(),
            metered_energy_kwh: report.metered_energy_kwh,
            plant_energy_kwh,
            accrued_cost: report.accrued_cost,
            best_effort: report.best_effort,
        });
    }

    fn process_action(&mut self, slot: Slot, action: &EventAction) -> Result<(), RunError> {
        match action {
            EventAction::Swipe { rfid } => self.process_swipe(slot, rfid),
            EventAction::DsoUpdate { effective_from_slot, reference_kw, limit_kw, weights } => {
                let update = lac::DsoSignal {
                    effective_from_slot: *effective_from_slot,
                    reference_kw: reference_kw.clone(),
                    limit_kw: limit_kw.clone(),
                    weights: weights.clone().unwrap_or_else(|| vec![1.0; reference_kw.len()]),
                };
                self.events.push(EventRecord::SignalUpdate {
                    slot,
                    effective_from_slot: *effective_from_slot,
                });
                let previous = self.current_schedules();
                let outcome = self.center.apply_dso_signal(slot, update)?;
                self.absorb_plan(slot, "dso_update", &previous, &outcome)?;
                Ok(())
            }
            EventAction::TariffUpdate { prices_per_kwh } => {
                self.events.push(EventRecord::PriceUpdate { slot });
                let previous = self.current_schedules();
                let outcome = self
                    .center
                    .apply_tariff(slot, lac::Tariff { prices_per_kwh: prices_per_kwh.clone() })?;
                self.absorb_plan(slot, "tariff_update", &previous, &outcome)?;
                Ok(())
            }
        }
    }

    fn process_swipe(&mut self, slot: Slot, rfid: &str) -> Result<(), RunError> {
        match self.center.rfid_swipe(slot, rfid)? {
            SwipeOutcome::Authenticated { session, socket, plan } => {
                let vehicle = self
                    .scenario
                    .vehicle_for(rfid)
                    .ok_or_else(|| RunError::UnknownVehicle(rfid.to_owned()))?;
                let reservation = self
                    .scenario
                    .reservation_for(rfid, slot)
                    .expect("the center matched a reservation");
                let battery = battery_for(vehicle, reservation.arrival_soc_pct);
                self.plant.plug_in(&socket, session.clone(), battery)?;
                self.events.push(EventRecord::SessionStart {
                    slot,
                    session: session.to_string(),
                    rfid: rfid.to_owned(),
                    socket: socket.to_string(),
                });
                self.live.insert(
                    session,
                    SessionTracking { rfid: rfid.to_owned(), socket, last_reading: None },
                );
                self.absorb_plan(slot, "session_start", &BTreeMap::new(), &plan)?;
                Ok(())
            }
            SwipeOutcome::SessionEnded(report) => {
                let tracking = self.live.remove(&report.session).expect("live session");
                let vehicle = self.plant.unplug(&tracking.socket)?;
                self.record_session_end(
                    slot,
                    &report,
                    &tracking,
                    &vehicle.battery,
                    vehicle.cumulative_energy_kwh,
                );
                Ok(())
            }
        }
    }

    fn periodic_tick(&mut self, slot: Slot) -> Result<(), RunError> {
        let previous = self.current_schedules();
        let outcome = self.center.tick(slot)?;
        self.absorb_plan(slot, "periodic", &previous, &outcome)
    }

    /// Schedules currently in force, for computing the previous plan's tail.
    fn current_schedules(&self) -> BTreeMap<SessionId, LoadSchedule> {
        self.center
            .controller()
            .sessions()
            .filter(|m| m.session.status == SessionStatus::Active)
            .filter_map(|m| m.schedule.clone().map(|s| (m.session.id.clone(), s)))
            .collect()
    }

    /// Folds one planning outcome into the journal, pushes the schedules to
    /// the stations, and re-checks them independently.
    fn absorb_plan(
        &mut self,
        slot: Slot,
        trigger: &str,
        previous: &BTreeMap<SessionId, LoadSchedule>,
        outcome: &TickOutcome,
    ) -> Result<(), RunError> {
        if let Some(error) = &outcome.planning_error {
            self.events.push(EventRecord::PlanningError { slot, error: error.clone() });
            return Ok(());
        }
        if !outcome.replanned {
            return Ok(());
        }
        for msg in &outcome.schedules {
            self.plant.set_commands(&msg.socket, msg.from_slot, &msg.setpoints_kw)?;
        }

        let controller = self.center.controller();
        let previous_tail = if previous.is_empty() {
            None
        } else {
            Some(tail_objective(
                previous,
                controller.tariff(),
                controller.signal(),
                controller.config(),
                slot,
            ))
        };
        let schedules: BTreeMap<String, ScheduleDump> = outcome
            .schedules
            .iter()
            .map(|msg| {
                (
                    msg.session.to_string(),
                    ScheduleDump {
                        from_slot: msg.from_slot,
                        setpoints_kw: msg.setpoints_kw.clone(),
                        amps: msg.amps.clone(),
                    },
                )
            })
            .collect();
        self.events.push(EventRecord::Replan {
            slot,
            trigger: trigger.to_owned(),
            objective: outcome.objective,
            previous_tail_objective: previous_tail,
            relaxed: outcome.relaxed,
            node_limited: outcome.node_limited,
            shortfall_kwh: outcome.shortfall_kwh.values().sum::<f64>().max(0.0),
            schedules,
        });
        self.verify_plan(slot, outcome);
        Ok(())
    }

    /// Independent re-check of the freshly pushed schedules against the
    /// session and grid constraints.
    fn verify_plan(&mut self, slot: Slot, outcome: &TickOutcome) {
        let controller = self.center.controller();
        let sessions: Vec<ChargingSession> = controller
            .sessions()
            .filter(|m| m.session.status == SessionStatus::Active)
            .map(|m| m.session.clone())
            .collect();
        let schedules = self.current_schedules();
        let findings = verify_schedules(
            &sessions,
            controller.tariff(),
            controller.signal(),
            controller.config(),
            &schedules,
            &outcome.shortfall_kwh,
            slot,
            VERIFY_TOL,
        );
        for finding in findings {
            let description = format!("slot {slot}: {finding:?}");
            self.events.push(EventRecord::Violation { slot, description: description.clone() });
            self.violations.push(description);
        }
    }

    fn execute_slot(&mut self, slot: Slot) {
        let controller = self.center.controller();
        let soc_estimate: f64 = controller
            .sessions()
            .filter(|m| m.session.status == SessionStatus::Active)
            .map(|m| m.session.soc_kwh)
            .sum();
        let active_sessions = controller
            .sessions()
            .filter(|m| m.session.status == SessionStatus::Active && m.session.covers_slot(slot))
            .count();
        let price = controller.tariff().price(slot);
        let reference_kw = controller.signal().reference_kw[slot];
        let limit_kw = controller.signal().limit_kw[slot];

        let readings = self.plant.execute_slot(slot);
        let commanded_kw: f64 = readings.iter().map(|r| r.commanded_kw).sum();
        let applied_kw: f64 = readings.iter().map(|r| r.metered_kw).sum();
        for reading in readings {
            if let Some(tracking) = self.live.get_mut(&reading.session) {
                tracking.last_reading = Some(reading.clone());
            }
            if let Some(delivered) = self.channel.transmit(reading) {
                self.center.ingest_report(delivered).expect("reports never fail");
            }
        }
        let soc_true_kwh: f64 = self
            .scenario
            .sockets
            .iter()
            .filter_map(|s| self.plant.battery(&SocketId::from(s.id.as_str())))
            .map(|b| b.soc_kwh)
            .sum();
        self.timeseries.push(SlotRow {
            slot,
            price_per_kwh: price,
            reference_kw,
            limit_kw,
            commanded_kw,
            applied_kw,
            soc_estimate_kwh: soc_estimate,
            soc_true_kwh,
            active_sessions,
        });
    }
}

fn battery_for(vehicle: &VehicleSpec, arrival_soc_pct: f64) -> BatteryState {
    let mut battery = BatteryState::new(
        vehicle.true_capacity_kwh,
        arrival_soc_pct / 100.0 * vehicle.true_capacity_kwh,
        vehicle.true_loss_factor,
    );
    battery.taper_start_pct = vehicle.taper_start_pct;
    battery
}
