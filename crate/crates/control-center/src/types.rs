//! Registration, reservation, configuration, and outcome types for the
//! control center.

use lac::{ControllerConfig, DsoSignal, LacError, SessionId, Slot, SocketId, Tariff};
use serde::{Deserialize, Serialize};

/// A registered vehicle: what the center assumes about it before (and
/// unless) measurements teach it otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PevProfile {
    /// Access token on the driver's card.
    pub rfid: String,
    /// Maximum charging power the vehicle/charger pair supports (kW).
    pub max_power_kw: f64,
    pub phases: u8,
    /// Battery capacity the center assumes (kWh); the real one may differ.
    pub assumed_capacity_kwh: f64,
    /// Charger loss fraction the center assumes.
    pub assumed_loss_factor: f64,
}

/// A booked charging window for a registered vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub rfid: String,
    pub socket: SocketId,
    /// First slot of the booked window.
    pub from_slot: Slot,
    /// Slot the vehicle leaves (exclusive end of the window).
    pub departure_slot: Slot,
    /// SoC the driver expects to arrive with (percent of assumed capacity).
    pub arrival_soc_pct: f64,
    /// SoC the driver wants at departure (percent).
    pub target_soc_pct: f64,
    /// SoC floor the schedule must respect (percent).
    pub min_soc_pct: f64,
    /// SoC ceiling the schedule must respect (percent).
    pub max_soc_pct: f64,
}

/// One physical socket the center controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSocket {
    pub id: SocketId,
    pub phases: u8,
    pub max_amps: u32,
}

/// Static configuration of a control center.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterConfig {
    pub controller: ControllerConfig,
    pub initial_tariff: Tariff,
    pub initial_signal: DsoSignal,
    pub sockets: Vec<CenterSocket>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CenterError {
    #[error("no vehicle registered for RFID {0}")]
    UnknownRfid(String),
    #[error("RFID {0} is already registered")]
    DuplicateRfid(String),
    #[error("no reservation admits RFID {rfid} at slot {slot}")]
    NoValidReservation { rfid: String, slot: Slot },
    #[error("socket {socket} is already booked or occupied in that window")]
    SocketBusy { socket: SocketId },
    #[error("unknown socket {0}")]
    UnknownSocket(SocketId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("reservation window [{from}, {to}) is empty or leaves the horizon")]
    InvalidWindow { from: Slot, to: Slot },
    #[error("reservation SoC percentages are inconsistent")]
    InvalidSocPercentages,
    #[error("planning failed: {0}")]
    Planning(#[from] LacError),
}

/// Handed to the back office when a session ends; unlike meter reports this
/// travels a reliable path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSessionReport {
    pub session: SessionId,
    pub rfid: String,
    pub socket: SocketId,
    pub start_slot: Slot,
    pub end_slot: Slot,
    pub planned_departure_slot: Slot,
    /// Grid energy metered over the whole session (kWh).
    pub metered_energy_kwh: f64,
    /// Cost attributed to the session (currency units).
    pub accrued_cost: f64,
    /// Center's SoC estimate at the end (kWh of assumed capacity).
    pub final_soc_estimate_kwh: f64,
    pub target_soc_kwh: f64,
    /// The last plans could not promise the target and declared shortfall.
    pub best_effort: bool,
}
