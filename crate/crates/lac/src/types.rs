//! Exchanged planning data: tariffs, grid-operator signals, controller
//! configuration, and the schedules the controller emits.

use crate::session::{SessionId, Slot};
use serde::{Deserialize, Serialize};

/// Per-slot energy prices for the whole planning horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    /// Price of one kWh drawn from the grid during each slot.
    pub prices_per_kwh: Vec<f64>,
}

impl Tariff {
    /// Flat price across `horizon_slots` slots.
    pub fn flat(price: f64, horizon_slots: usize) -> Self {
        Tariff { prices_per_kwh: vec![price; horizon_slots] }
    }

    pub fn price(&self, slot: Slot) -> f64 {
        self.prices_per_kwh[slot]
    }

    pub fn len(&self) -> usize {
        self.prices_per_kwh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices_per_kwh.is_empty()
    }
}

/// Grid-operator guidance for the load area: a per-slot reference profile the
/// aggregate should track, a hard aggregate limit, and per-slot tracking
/// weights.
///
/// All three vectors are absolute (indexed from slot 0) and must cover the
/// configured horizon. When an update arrives mid-run, `merge_update` keeps
/// the old values before `effective_from_slot` and adopts the new ones from
/// there on, so already-elapsed slots never change retroactively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsoSignal {
    /// First slot at which this signal's values apply.
    pub effective_from_slot: Slot,
    /// Aggregate power profile the load area should follow (kW, ≥ 0).
    pub reference_kw: Vec<f64>,
    /// Hard upper limit on aggregate charging power (kW, ≥ 0).
    pub limit_kw: Vec<f64>,
    /// Per-slot tracking weights (≥ 0); larger weight penalizes deviation
    /// from the reference in that slot more.
    pub weights: Vec<f64>,
}

impl DsoSignal {
    /// Uniform signal: constant reference and limit, unit weights.
    pub fn uniform(reference_kw: f64, limit_kw: f64, horizon_slots: usize) -> Self {
        DsoSignal {
            effective_from_slot: 0,
            reference_kw: vec![reference_kw; horizon_slots],
            limit_kw: vec![limit_kw; horizon_slots],
            weights: vec![1.0; horizon_slots],
        }
    }

    /// Applies `update` on top of `self`: slots before
    /// `update.effective_from_slot` keep their current values.
    pub fn merge_update(&mut self, update: &DsoSignal) {
        let from = update.effective_from_slot;
        merge_tail(&mut self.reference_kw, &update.reference_kw, from);
        merge_tail(&mut self.limit_kw, &update.limit_kw, from);
        merge_tail(&mut self.weights, &update.weights, from);
    }
}

fn merge_tail(current: &mut Vec<f64>, update: &[f64], from: Slot) {
    if update.len() > current.len() {
        current.resize(update.len(), 0.0);
    }
    for k in from..update.len() {
        current[k] = update[k];
    }
}

/// Static controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Length of one scheduling slot in minutes.
    pub slot_minutes: u32,
    /// Number of slots in the planning horizon.
    pub horizon_slots: usize,
    /// Weight of the worst-slot reference-tracking term relative to energy
    /// cost in the planning objective.
    pub tracking_weight: f64,
    /// A re-planned session may cost at most `(1 + cost_cap_slack)` times its
    /// first schedule.
    pub cost_cap_slack: f64,
    /// Re-plan every this many slots; 0 disables periodic re-planning (event
    /// driven only).
    pub replan_period_slots: usize,
}

impl ControllerConfig {
    pub fn slot_hours(&self) -> f64 {
        f64::from(self.slot_minutes) / 60.0
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            slot_minutes: 5,
            horizon_slots: 288,
            tracking_weight: 1.0,
            cost_cap_slack: 0.1,
            replan_period_slots: 1,
        }
    }
}

/// One session's charging plan from `start_slot` until its departure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule {
    pub session_id: SessionId,
    /// Slot the first entry of `levels` applies to.
    pub start_slot: Slot,
    /// Per-slot on-fraction, each in `{0} ∪ [min_on_fraction, 1]`.
    pub levels: Vec<f64>,
    /// Per-slot power setpoint (kW): `levels[i] * max_power_kw`.
    pub setpoints_kw: Vec<f64>,
    /// Predicted battery SoC (kWh): entry `i` is the SoC entering slot
    /// `start_slot + i`; the final entry is the SoC at departure.
    pub predicted_soc_kwh: Vec<f64>,
}

impl LoadSchedule {
    /// Exclusive end of the covered window.
    pub fn end_slot(&self) -> Slot {
        self.start_slot + self.levels.len()
    }

    /// On-fraction planned for slot `k`; zero outside the covered window.
    pub fn level_at(&self, k: Slot) -> f64 {
        if k >= self.start_slot && k < self.end_slot() {
            self.levels[k - self.start_slot]
        } else {
            0.0
        }
    }

    /// Power setpoint planned for slot `k` (kW); zero outside the window.
    pub fn setpoint_at(&self, k: Slot) -> f64 {
        if k >= self.start_slot && k < self.end_slot() {
            self.setpoints_kw[k - self.start_slot]
        } else {
            0.0
        }
    }
}
