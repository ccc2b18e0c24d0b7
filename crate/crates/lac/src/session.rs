//! Charging-session state as the load-area controller sees it.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Discrete scheduling timeslot index (slot `k` covers the wall-clock span
/// `[k * slot_minutes, (k + 1) * slot_minutes)`).
pub type Slot = usize;

/// Opaque session token issued at authentication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        SessionId(s.to_owned())
    }
}

/// Identifies one physical charging outlet, e.g. `"CS01-1"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SocketId(pub String);

impl fmt::Display for SocketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SocketId {
    fn from(s: &str) -> Self {
        SocketId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Reserved,
    Active,
    Terminated,
}

/// Everything the scheduler needs to know about one plugged-in vehicle.
///
/// State of charge is tracked in kWh against the *assumed* battery capacity;
/// the physical battery may differ, which is exactly the mismatch the
/// measurement feedback corrects for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub id: SessionId,
    pub socket: SocketId,
    /// Maximum charging power when fully on (kW).
    pub max_power_kw: f64,
    /// Number of supply phases.
    pub phases: u8,
    /// Minimum admissible on-fraction: charging hardware cannot regulate
    /// below its minimum current, so per-slot levels live in
    /// `{0} ∪ [min_on_fraction, 1]`.
    pub min_on_fraction: f64,
    /// Charger/cable loss fraction assumed by the controller, in `[0, 1)`.
    pub loss_factor: f64,
    /// Battery capacity assumed by the controller (kWh).
    pub assumed_capacity_kwh: f64,
    /// Current state-of-charge estimate at the planning instant (kWh).
    pub soc_kwh: f64,
    /// Lower bound the SoC must never cross (kWh).
    pub min_soc_kwh: f64,
    /// Upper bound the SoC must never cross (kWh).
    pub max_soc_kwh: f64,
    /// State of charge the session must reach by departure (kWh).
    pub target_soc_kwh: f64,
    /// First slot in which the session may charge.
    pub start_slot: Slot,
    /// First slot in which the session is gone (exclusive end of its window).
    pub departure_slot: Slot,
    /// Cost of the energy metered so far (currency units).
    pub accrued_cost: f64,
    /// Total charging cost of the first schedule ever computed for this
    /// session; later re-plans may not exceed it by more than the configured
    /// slack. `None` until that first schedule exists.
    pub reference_cost: Option<f64>,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session {id}: max power must be positive, got {value}")]
    BadMaxPower { id: SessionId, value: f64 },
    #[error("session {id}: min on-fraction must lie in (0, 1), got {value}")]
    BadMinOnFraction { id: SessionId, value: f64 },
    #[error("session {id}: loss factor must lie in [0, 1), got {value}")]
    BadLossFactor { id: SessionId, value: f64 },
    #[error("session {id}: assumed capacity must be positive, got {value}")]
    BadCapacity { id: SessionId, value: f64 },
    #[error("session {id}: SoC bounds are inverted or the current/target SoC leaves them")]
    SocOutOfBox { id: SessionId },
    #[error("session {id}: departure slot {departure} is not after start slot {start}")]
    EmptyWindow { id: SessionId, start: Slot, departure: Slot },
}

impl ChargingSession {
    /// Checks the session's internal consistency.
    pub fn validate(&self) -> Result<(), SessionError> {
        if !(self.max_power_kw > 0.0) {
            return Err(SessionError::BadMaxPower { id: self.id.clone(), value: self.max_power_kw });
        }
        if !(self.min_on_fraction > 0.0 && self.min_on_fraction < 1.0) {
            return Err(SessionError::BadMinOnFraction {
                id: self.id.clone(),
                value: self.min_on_fraction,
            });
        }
        if !(self.loss_factor >= 0.0 && self.loss_factor < 1.0) {
            return Err(SessionError::BadLossFactor {
                id: self.id.clone(),
                value: self.loss_factor,
            });
        }
        if !(self.assumed_capacity_kwh > 0.0) {
            return Err(SessionError::BadCapacity {
                id: self.id.clone(),
                value: self.assumed_capacity_kwh,
            });
        }
        let box_ok = self.min_soc_kwh <= self.max_soc_kwh
            && self.min_soc_kwh <= self.soc_kwh
            && self.soc_kwh <= self.max_soc_kwh
            && self.min_soc_kwh <= self.target_soc_kwh
            && self.target_soc_kwh <= self.max_soc_kwh;
        if !box_ok {
            return Err(SessionError::SocOutOfBox { id: self.id.clone() });
        }
        if self.status == SessionStatus::Active && self.start_slot >= self.departure_slot {
            return Err(SessionError::EmptyWindow {
                id: self.id.clone(),
                start: self.start_slot,
                departure: self.departure_slot,
            });
        }
        Ok(())
    }

    /// Whether the session may draw power during slot `k`.
    pub fn covers_slot(&self, k: Slot) -> bool {
        self.status == SessionStatus::Active && k >= self.start_slot && k < self.departure_slot
    }

    /// Battery-side energy gained per fully-on slot (kWh).
    pub fn slot_gain_kwh(&self, slot_hours: f64) -> f64 {
        self.max_power_kw * slot_hours * (1.0 - self.loss_factor)
    }
}
