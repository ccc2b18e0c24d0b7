//! Deterministic load-area plant simulator: charging sockets that quantize
//! power setpoints to whole-ampere pilot signals, vehicle batteries with
//! true (possibly mis-assumed) capacity and losses, grid-side metering, and
//! a seeded lossy channel for the report path.

mod battery;
mod channel;
mod quantize;
mod socket;

pub use battery::{step_battery, BatteryState};
pub use channel::LossyChannel;
pub use quantize::{
    amps_to_duty, amps_to_kw, min_on_fraction_for, quantize_setpoint, setpoint_to_amps,
    PilotDuty, MAX_AMPS, MIN_AMPS, PHASE_VOLTAGE,
};
pub use socket::{MeterReading, Plant, PlantError, SocketConfig, UnpluggedVehicle};
