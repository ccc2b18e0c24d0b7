//! Scenario files: a single JSON document describing everything one
//! simulation run needs — planner configuration, prices, grid signal,
//! sockets, vehicles (with their real physics next to what the center
//! believes about them), reservations, timed events, and the report channel.

use control_center::{CenterConfig, CenterSocket, PevProfile, Reservation};
use lac::{
    pct_to_kwh, ChargingSession, ControllerConfig, DsoSignal, SessionId, SessionStatus, Slot,
    SocketId, Tariff,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub config: PlannerConfig,
    /// Energy price per slot (currency/kWh); at least `horizon_slots` long.
    pub tariff: Vec<f64>,
    pub dso: DsoSpec,
    pub sockets: Vec<SocketSpec>,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub reservations: Vec<ReservationSpec>,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
    #[serde(default)]
    pub channel: ChannelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub slot_minutes: u32,
    pub horizon_slots: usize,
    /// Weight of the reference-tracking term in the objective.
    pub tracking_weight: f64,
    /// Allowed relative cost overrun vs the session's first plan.
    pub cost_cap_slack: f64,
    /// Re-plan every this many slots; 0 plans once per session and never
    /// again (static profile mode).
    pub replan_period_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsoSpec {
    /// Aggregate load profile the grid wants tracked (kW per slot).
    pub reference_kw: Vec<f64>,
    /// Hard aggregate ceiling (kW per slot).
    pub limit_kw: Vec<f64>,
    /// Per-slot tracking weights; omitted means all ones.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocketSpec {
    pub id: String,
    pub phases: u8,
    pub max_amps: u32,
    /// Floor the setpoint to whole amperes like real hardware; false gives
    /// an idealized socket that applies setpoints exactly.
    #[serde(default = "default_true")]
    pub quantize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub rfid: String,
    pub max_power_kw: f64,
    pub phases: u8,
    /// Capacity the center plans with (datasheet value).
    pub assumed_capacity_kwh: f64,
    /// Charger loss fraction the center plans with.
    pub assumed_loss_factor: f64,
    /// Capacity the battery actually has.
    pub true_capacity_kwh: f64,
    /// Loss fraction the charger actually exhibits.
    pub true_loss_factor: f64,
    /// SoC percentage above which the battery tapers its acceptance.
    #[serde(default = "default_taper")]
    pub taper_start_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservationSpec {
    pub rfid: String,
    pub socket: String,
    pub from_slot: Slot,
    pub departure_slot: Slot,
    pub arrival_soc_pct: f64,
    pub target_soc_pct: f64,
    #[serde(default)]
    pub min_soc_pct: f64,
    #[serde(default = "default_max_soc")]
    pub max_soc_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub slot: Slot,
    #[serde(flatten)]
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EventAction {
    /// A card is presented: starts the matching reserved session, or ends a
    /// running one.
    Swipe { rfid: String },
    /// The grid operator revises its signal from `effective_from_slot` on.
    DsoUpdate {
        effective_from_slot: Slot,
        reference_kw: Vec<f64>,
        limit_kw: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// New prices take effect immediately.
    TariffUpdate { prices_per_kwh: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Probability that any single meter report is lost in transit.
    pub loss_probability: f64,
    pub seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec { loss_probability: 0.0, seed: 0 }
    }
}

fn default_true() -> bool {
    true
}
fn default_taper() -> f64 {
    85.0
}
fn default_max_soc() -> f64 {
    100.0
}

/// A scenario that cannot run, with one diagnostic per problem found.
#[derive(Debug, Clone, Error)]
pub struct ScenarioInvalid {
    pub problems: Vec<String>,
}

impl fmt::Display for ScenarioInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario invalid ({} problem(s)):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(#[from] ScenarioInvalid),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    /// Checks every cross-reference and dimension; collects all problems
    /// instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ScenarioInvalid> {
        let mut problems = Vec::new();
        let horizon = self.config.horizon_slots;
        if self.config.slot_minutes == 0 {
            problems.push("config.slot_minutes: must be at least 1".to_owned());
        }
        if horizon == 0 {
            problems.push("config.horizon_slots: must be at least 1".to_owned());
        }
        if !(0.0..1.0).contains(&self.config.cost_cap_slack) && self.config.cost_cap_slack < 0.0 {
            problems.push("config.cost_cap_slack: must be non-negative".to_owned());
        }
        if self.config.tracking_weight < 0.0 {
            problems.push("config.tracking_weight: must be non-negative".to_owned());
        }
        let check_len = |problems: &mut Vec<String>, what: &str, len: usize| {
            if len < horizon {
                problems.push(format!(
                    "{what}: covers {len} slots but the horizon is {horizon}"
                ));
            }
        };
        check_len(&mut problems, "tariff", self.tariff.len());
        check_len(&mut problems, "dso.reference_kw", self.dso.reference_kw.len());
        check_len(&mut problems, "dso.limit_kw", self.dso.limit_kw.len());
        if let Some(w) = &self.dso.weights {
            check_len(&mut problems, "dso.weights", w.len());
        }

        let mut socket_ids = BTreeSet::new();
        for (i, s) in self.sockets.iter().enumerate() {
            if !socket_ids.insert(s.id.clone()) {
                problems.push(format!("sockets[{i}].id: duplicate id {:?}", s.id));
            }
            if !(1..=3).contains(&s.phases) {
                problems.push(format!("sockets[{i}].phases: {} not in 1..=3", s.phases));
            }
        }
        let mut rfids = BTreeSet::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            if !rfids.insert(v.rfid.clone()) {
                problems.push(format!("vehicles[{i}].rfid: duplicate rfid {:?}", v.rfid));
            }
            if v.max_power_kw <= 0.0 {
                problems.push(format!("vehicles[{i}].max_power_kw: must be positive"));
            }
            if !(1..=3).contains(&v.phases) {
                problems.push(format!("vehicles[{i}].phases: {} not in 1..=3", v.phases));
            }
            for (field, value) in [
                ("assumed_capacity_kwh", v.assumed_capacity_kwh),
                ("true_capacity_kwh", v.true_capacity_kwh),
            ] {
                if value <= 0.0 {
                    problems.push(format!("vehicles[{i}].{field}: must be positive"));
                }
            }
            for (field, value) in [
                ("assumed_loss_factor", v.assumed_loss_factor),
                ("true_loss_factor", v.true_loss_factor),
            ] {
                if !(0.0..1.0).contains(&value) {
                    problems.push(format!("vehicles[{i}].{field}: {value} not in [0, 1)"));
                }
            }
        }
        for (i, r) in self.reservations.iter().enumerate() {
            if !rfids.contains(&r.rfid) {
                problems.push(format!("reservations[{i}].rfid: unknown rfid {:?}", r.rfid));
            }
            if !socket_ids.contains(&r.socket) {
                problems.push(format!("reservations[{i}].socket: unknown socket {:?}", r.socket));
            }
            if r.from_slot >= r.departure_slot {
                problems.push(format!(
                    "reservations[{i}]: window [{}, {}) is empty",
                    r.from_slot, r.departure_slot
                ));
            }
            if r.departure_slot > horizon {
                problems.push(format!(
                    "reservations[{i}].departure_slot: {} beyond horizon {horizon}",
                    r.departure_slot
                ));
            }
        }
        let mut last_slot = 0;
        for (i, e) in self.events.iter().enumerate() {
            if e.slot < last_slot {
                problems.push(format!(
                    "events[{i}]: slot {} out of order (previous event at {})",
                    e.slot, last_slot
                ));
            }
            last_slot = last_slot.max(e.slot);
            if e.slot >= horizon {
                problems.push(format!("events[{i}].slot: {} beyond horizon {horizon}", e.slot));
            }
            match &e.action {
                EventAction::Swipe { rfid } => {
                    if !rfids.contains(rfid) {
                        problems.push(format!("events[{i}].rfid: unknown rfid {rfid:?}"));
                    }
                }
                EventAction::DsoUpdate { reference_kw, limit_kw, weights, .. } => {
                    check_len(&mut problems, &format!("events[{i}].reference_kw"), reference_kw.len());
                    check_len(&mut problems, &format!("events[{i}].limit_kw"), limit_kw.len());
                    if let Some(w) = weights {
                        check_len(&mut problems, &format!("events[{i}].weights"), w.len());
                    }
                }
                EventAction::TariffUpdate { prices_per_kwh } => {
                    check_len(&mut problems, &format!("events[{i}].prices_per_kwh"), prices_per_kwh.len());
                }
            }
        }
        if !(0.0..=1.0).contains(&self.channel.loss_probability) {
            problems.push(format!(
                "channel.loss_probability: {} not in [0, 1]",
                self.channel.loss_probability
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioInvalid { problems })
        }
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            slot_minutes: self.config.slot_minutes,
            horizon_slots: self.config.horizon_slots,
            tracking_weight: self.config.tracking_weight,
            cost_cap_slack: self.config.cost_cap_slack,
            replan_period_slots: self.config.replan_period_slots,
        }
    }

    pub fn dso_signal(&self) -> DsoSignal {
        DsoSignal {
            effective_from_slot: 0,
            reference_kw: self.dso.reference_kw.clone(),
            limit_kw: self.dso.limit_kw.clone(),
            weights: self
                .dso
                .weights
                .clone()
                .unwrap_or_else(|| vec![1.0; self.dso.reference_kw.len()]),
        }
    }

    /// The static configuration the control center is booted with.
    pub fn center_config(&self) -> CenterConfig {
        CenterConfig {
            controller: self.controller_config(),
            initial_tariff: Tariff { prices_per_kwh: self.tariff.clone() },
            initial_signal: self.dso_signal(),
            sockets: self
                .sockets
                .iter()
                .map(|s| CenterSocket {
                    id: SocketId::from(s.id.as_str()),
                    phases: s.phases,
                    max_amps: s.max_amps,
                })
                .collect(),
        }
    }

    pub fn profile_for(&self, rfid: &str) -> Option<PevProfile> {
        self.vehicles.iter().find(|v| v.rfid == rfid).map(|v| PevProfile {
            rfid: v.rfid.clone(),
            max_power_kw: v.max_power_kw,
            phases: v.phases,
            assumed_capacity_kwh: v.assumed_capacity_kwh,
            assumed_loss_factor: v.assumed_loss_factor,
        })
    }

    pub fn vehicle_for(&self, rfid: &str) -> Option<&VehicleSpec> {
        self.vehicles.iter().find(|v| v.rfid == rfid)
    }

    pub fn center_reservations(&self) -> Vec<Reservation> {
        self.reservations
            .iter()
            .map(|r| Reservation {
                rfid: r.rfid.clone(),
                socket: SocketId::from(r.socket.as_str()),
                from_slot: r.from_slot,
                departure_slot: r.departure_slot,
                arrival_soc_pct: r.arrival_soc_pct,
                target_soc_pct: r.target_soc_pct,
                min_soc_pct: r.min_soc_pct,
                max_soc_pct: r.max_soc_pct,
            })
            .collect()
    }

    /// The reservation a swipe at `slot` by `rfid` would start.
    pub fn reservation_for(&self, rfid: &str, slot: Slot) -> Option<&ReservationSpec> {
        self.reservations
            .iter()
            .find(|r| r.rfid == rfid && r.from_slot <= slot && slot < r.departure_slot)
    }

    /// All reservations instantiated as planning sessions at their start
    /// slots, for offline analysis of the plan the center would compute.
    pub fn planning_sessions(&self) -> Vec<ChargingSession> {
        self.reservations
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let v = self.vehicle_for(&r.rfid)?;
                let capacity = v.assumed_capacity_kwh;
                Some(ChargingSession {
                    id: SessionId::from(format!("S{:03}", i + 1).as_str()),
                    socket: SocketId::from(r.socket.as_str()),
                    max_power_kw: v.max_power_kw,
                    phases: v.phases,
                    min_on_fraction: plant::min_on_fraction_for(v.max_power_kw, v.phases),
                    loss_factor: v.assumed_loss_factor,
                    assumed_capacity_kwh: capacity,
                    soc_kwh: pct_to_kwh(r.arrival_soc_pct, capacity),
                    min_soc_kwh: pct_to_kwh(r.min_soc_pct, capacity),
                    max_soc_kwh: pct_to_kwh(r.max_soc_pct, capacity),
                    target_soc_kwh: pct_to_kwh(r.target_soc_pct, capacity),
                    start_slot: r.from_slot,
                    departure_slot: r.departure_slot,
                    accrued_cost: 0.0,
                    reference_cost: None,
                    status: SessionStatus::Active,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Scenario {
        Scenario {
            name: "minimal".to_owned(),
            config: PlannerConfig {
                slot_minutes: 5,
                horizon_slots: 12,
                tracking_weight: 0.1,
                cost_cap_slack: 0.1,
                replan_period_slots: 1,
            },
            tariff: vec![0.1; 12],
            dso: DsoSpec { reference_kw: vec![2.0; 12], limit_kw: vec![10.0; 12], weights: None },
            sockets: vec![SocketSpec {
                id: "CS01-1".to_owned(),
                phases: 1,
                max_amps: 16,
                quantize: true,
            }],
            vehicles: vec![VehicleSpec {
                rfid: "CARD-A".to_owned(),
                max_power_kw: 3.68,
                phases: 1,
                assumed_capacity_kwh: 22.0,
                assumed_loss_factor: 0.1,
                true_capacity_kwh: 19.0,
                true_loss_factor: 0.05,
                taper_start_pct: 85.0,
            }],
            reservations: vec![ReservationSpec {
                rfid: "CARD-A".to_owned(),
                socket: "CS01-1".to_owned(),
                from_slot: 0,
                departure_slot: 10,
                arrival_soc_pct: 10.0,
                target_soc_pct: 20.0,
                min_soc_pct: 0.0,
                max_soc_pct: 100.0,
            }],
            events: vec![TimedEvent { slot: 0, action: EventAction::Swipe { rfid: "CARD-A".to_owned() } }],
            channel: ChannelSpec::default(),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let scenario = minimal();
        let text = scenario.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, scenario);
    }

    #[test]
    fn validation_collects_every_problem() {
        let mut s = minimal();
        s.tariff.truncate(4);
        s.reservations[0].socket = "CS99-9".to_owned();
        s.events.push(TimedEvent { slot: 50, action: EventAction::Swipe { rfid: "GHOST".to_owned() } });
        s.events.insert(0, TimedEvent { slot: 3, action: EventAction::Swipe { rfid: "CARD-A".to_owned() } });
        let err = s.validate().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("tariff"), "{text}");
        assert!(text.contains("CS99-9"), "{text}");
        assert!(text.contains("GHOST"), "{text}");
        assert!(text.contains("out of order"), "{text}");
        assert!(text.contains("beyond horizon"), "{text}");
        assert!(err.problems.len() >= 5, "{:?}", err.problems);
    }

    #[test]
    fn defaults_fill_in_optional_fields() {
        let text = r#"{
            "name": "tiny",
            "config": {"slot_minutes": 5, "horizon_slots": 2, "tracking_weight": 0.0,
                       "cost_cap_slack": 0.1, "replan_period_slots": 1},
            "tariff": [0.1, 0.1],
            "dso": {"reference_kw": [1.0, 1.0], "limit_kw": [5.0, 5.0]},
            "sockets": [{"id": "A", "phases": 1, "max_amps": 16}]
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert!(s.sockets[0].quantize);
        assert!(s.vehicles.is_empty());
        assert_eq!(s.channel, ChannelSpec::default());
        assert_eq!(s.dso_signal().weights, vec![1.0, 1.0]);
    }

    #[test]
    fn json_syntax_errors_carry_position_diagnostics() {
        let err = Scenario::from_json("{\n  \"name\": oops\n}").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line"), "{text}");
    }
}
