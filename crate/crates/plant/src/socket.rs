//! The simulated load area: charging sockets executing commanded setpoints
//! against plugged-in vehicle batteries, with grid-side metering.

use crate::battery::{step_battery, BatteryState};
use crate::quantize::{amps_to_kw, quantize_setpoint, setpoint_to_amps};
use lac::{SessionId, Slot, SocketId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Static description of one charging socket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocketConfig {
    pub id: SocketId,
    pub phases: u8,
    /// Hardware current limit (A).
    pub max_amps: u32,
    /// Whether the socket quantizes setpoints to whole amperes. Disabling
    /// this models an idealized continuously-variable charger.
    pub quantize: bool,
}

/// What one socket's meter saw during one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterReading {
    pub socket: SocketId,
    pub session: SessionId,
    pub slot: Slot,
    /// Setpoint the controller asked for (kW).
    pub commanded_kw: f64,
    /// Whole-ampere current actually advertised.
    pub offered_amps: u32,
    /// Power made available after quantization and current limits (kW).
    pub offered_kw: f64,
    /// Grid-side power actually drawn (kW) — the metered quantity.
    pub metered_kw: f64,
    /// Energy through the meter during this slot (kWh).
    pub slot_energy_kwh: f64,
    /// Energy through the meter since plug-in (kWh).
    pub cumulative_energy_kwh: f64,
    /// Exact battery SoC (percent) — what a lab probe would see.
    pub soc_pct: f64,
    /// SoC as the vehicle reports it: whole percentage points.
    pub soc_reported_pct: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("unknown socket {0}")]
    UnknownSocket(SocketId),
    #[error("socket {0} already has a vehicle plugged in")]
    SocketOccupied(SocketId),
    #[error("socket {0} has no vehicle plugged in")]
    SocketVacant(SocketId),
}

#[derive(Debug, Clone, PartialEq)]
struct SocketState {
    config: SocketConfig,
    occupant: Option<Occupant>,
}

#[derive(Debug, Clone, PartialEq)]
struct Occupant {
    session: SessionId,
    battery: BatteryState,
    commands: BTreeMap<Slot, f64>,
    cumulative_energy_kwh: f64,
    slot_energy_kwh: BTreeMap<Slot, f64>,
}

/// Everything that happened to a vehicle while it was plugged in, returned
/// at unplug time.
#[derive(Debug, Clone, PartialEq)]
pub struct UnpluggedVehicle {
    pub session: SessionId,
    pub battery: BatteryState,
    pub cumulative_energy_kwh: f64,
    pub slot_energy_kwh: BTreeMap<Slot, f64>,
}

/// Deterministic simulator for all sockets of a load area.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    sockets: BTreeMap<SocketId, SocketState>,
    slot_hours: f64,
}

impl Plant {
    pub fn new(slot_minutes: u32, sockets: Vec<SocketConfig>) -> Self {
        let sockets = sockets
            .into_iter()
            .map(|config| (config.id.clone(), SocketState { config, occupant: None }))
            .collect();
        Plant { sockets, slot_hours: f64::from(slot_minutes) / 60.0 }
    }

    pub fn socket_ids(&self) -> impl Iterator<Item = &SocketId> {
        self.sockets.keys()
    }

    pub fn socket_config(&self, socket: &SocketId) -> Option<&SocketConfig> {
        self.sockets.get(socket).map(|s| &s.config)
    }

    /// Connects a vehicle to a socket. Fails if the socket is unknown or
    /// occupied.
    pub fn plug_in(
        &mut self,
        socket: &SocketId,
        session: SessionId,
        battery: BatteryState,
    ) -> Result<(), PlantError> {
        let state = self
            .sockets
            .get_mut(socket)
            .ok_or_else(|| PlantError::UnknownSocket(socket.clone()))?;
        if state.occupant.is_some() {
            return Err(PlantError::SocketOccupied(socket.clone()));
        }
        state.occupant = Some(Occupant {
            session,
            battery,
            commands: BTreeMap::new(),
            cumulative_energy_kwh: 0.0,
            slot_energy_kwh: BTreeMap::new(),
        });
        Ok(())
    }

    /// Disconnects the vehicle and returns its final state.
    pub fn unplug(&mut self, socket: &SocketId) -> Result<UnpluggedVehicle, PlantError> {
        let state = self
            .sockets
            .get_mut(socket)
            .ok_or_else(|| PlantError::UnknownSocket(socket.clone()))?;
        let occ = state.occupant.take().ok_or_else(|| PlantError::SocketVacant(socket.clone()))?;
        Ok(UnpluggedVehicle {
            session: occ.session,
            battery: occ.battery,
            cumulative_energy_kwh: occ.cumulative_energy_kwh,
            slot_energy_kwh: occ.slot_energy_kwh,
        })
    }

    /// Replaces the occupant's commanded setpoints from `from_slot` on.
    /// Earlier commands are already executed (or missed) and stay untouched.
    pub fn set_commands(
        &mut self,
        socket: &SocketId,
        from_slot: Slot,
        setpoints_kw: &[f64],
    ) -> Result<(), PlantError> {
        let state = self
            .sockets
            .get_mut(socket)
            .ok_or_else(|| PlantError::UnknownSocket(socket.clone()))?;
        let occ =
            state.occupant.as_mut().ok_or_else(|| PlantError::SocketVacant(socket.clone()))?;
        occ.commands.split_off(&from_slot);
        for (i, &kw) in setpoints_kw.iter().enumerate() {
            occ.commands.insert(from_slot + i, kw);
        }
        Ok(())
    }

    /// Current battery state at a socket, if a vehicle is plugged in.
    pub fn battery(&self, socket: &SocketId) -> Option<&BatteryState> {
        self.sockets.get(socket)?.occupant.as_ref().map(|o| &o.battery)
    }

    pub fn session_at(&self, socket: &SocketId) -> Option<&SessionId> {
        self.sockets.get(socket)?.occupant.as_ref().map(|o| &o.session)
    }

    pub fn cumulative_energy(&self, socket: &SocketId) -> Option<f64> {
        self.sockets.get(socket)?.occupant.as_ref().map(|o| o.cumulative_energy_kwh)
    }

    /// Executes one slot on every occupied socket and returns the meter
    /// readings in socket order.
    pub fn execute_slot(&mut self, slot: Slot) -> Vec<MeterReading> {
        let mut readings = Vec::new();
        for state in self.sockets.values_mut() {
            let Some(occ) = state.occupant.as_mut() else { continue };
            let commanded_kw = occ.commands.get(&slot).copied().unwrap_or(0.0);
            let (offered_amps, offered_kw) = if state.config.quantize {
                let (amps, kw) = quantize_setpoint(commanded_kw, state.config.phases);
                if amps > state.config.max_amps {
                    (state.config.max_amps, amps_to_kw(state.config.max_amps, state.config.phases))
                } else {
                    (amps, kw)
                }
            } else {
                let cap = amps_to_kw(state.config.max_amps, state.config.phases);
                let kw = commanded_kw.max(0.0).min(cap);
                (setpoint_to_amps(kw, state.config.phases), kw)
            };
            let metered_kw = step_battery(&mut occ.battery, offered_kw, self.slot_hours);
            let slot_energy_kwh = metered_kw * self.slot_hours;
            occ.cumulative_energy_kwh += slot_energy_kwh;
            occ.slot_energy_kwh.insert(slot, slot_energy_kwh);
            readings.push(MeterReading {
                socket: state.config.id.clone(),
                session: occ.session.clone(),
                slot,
                commanded_kw,
                offered_amps,
                offered_kw,
                metered_kw,
                slot_energy_kwh,
                cumulative_energy_kwh: occ.cumulative_energy_kwh,
                soc_pct: occ.battery.soc_pct(),
                soc_reported_pct: occ.battery.reported_soc_pct(),
            });
        }
        readings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_socket(quantize: bool) -> Plant {
        Plant::new(
            5,
            vec![SocketConfig {
                id: SocketId::from("CS01-1"),
                phases: 1,
                max_amps: 16,
                quantize,
            }],
        )
    }

    fn socket() -> SocketId {
        SocketId::from("CS01-1")
    }

    #[test]
    fn commands_execute_quantized_against_the_battery() {
        let mut plant = one_socket(true);
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap();
        plant.set_commands(&socket(), 0, &[3.5]).unwrap();
        let readings = plant.execute_slot(0);
        assert_eq!(readings.len(), 1);
        let r = &readings[0];
        assert_eq!(r.offered_amps, 15);
        assert!((r.offered_kw - 3.45).abs() < 1e-12);
        assert!((r.metered_kw - 3.45).abs() < 1e-12);
        assert!((r.slot_energy_kwh - 3.45 / 12.0).abs() < 1e-12);
        assert!((plant.battery(&socket()).unwrap().soc_kwh - (2.0 + 3.45 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_sockets_skip_quantization() {
        let mut plant = one_socket(false);
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap();
        plant.set_commands(&socket(), 0, &[3.5]).unwrap();
        let r = &plant.execute_slot(0)[0];
        assert!((r.offered_kw - 3.5).abs() < 1e-12);
        assert!((r.metered_kw - 3.5).abs() < 1e-12);
    }

    #[test]
    fn uncommanded_slots_draw_nothing() {
        let mut plant = one_socket(true);
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap();
        let r = &plant.execute_slot(7)[0];
        assert_eq!(r.offered_amps, 0);
        assert_eq!(r.metered_kw, 0.0);
    }

    #[test]
    fn cumulative_energy_is_the_exact_sum_of_slot_energies() {
        let mut plant = one_socket(true);
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.05))
            .unwrap();
        plant
            .set_commands(&socket(), 0, &[3.68, 1.38, 0.0, 2.76, 3.68, 1.84])
            .unwrap();
        for slot in 0..6 {
            plant.execute_slot(slot);
        }
        let out = plant.unplug(&socket()).unwrap();
        let summed: f64 = out.slot_energy_kwh.values().sum();
        // Same additions in the same order: bitwise equality, not just close.
        assert_eq!(out.cumulative_energy_kwh, summed);
    }

    #[test]
    fn new_commands_only_replace_the_future() {
        let mut plant = one_socket(false);
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap();
        plant.set_commands(&socket(), 0, &[1.5, 1.5, 1.5]).unwrap();
        plant.execute_slot(0);
        plant.set_commands(&socket(), 1, &[2.5]).unwrap();
        let r1 = &plant.execute_slot(1)[0];
        assert!((r1.commanded_kw - 2.5).abs() < 1e-12);
        // Slot 2 was dropped by the replacement: nothing commanded.
        let r2 = &plant.execute_slot(2)[0];
        assert_eq!(r2.commanded_kw, 0.0);
    }

    #[test]
    fn plug_in_conflicts_are_rejected() {
        let mut plant = one_socket(true);
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap();
        let err = plant
            .plug_in(&socket(), SessionId::from("S002"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, PlantError::SocketOccupied(_)));
        let err =
            plant.set_commands(&SocketId::from("CS09-9"), 0, &[1.0]).unwrap_err();
        assert!(matches!(err, PlantError::UnknownSocket(_)));
        plant.unplug(&socket()).unwrap();
        let err = plant.unplug(&socket()).unwrap_err();
        assert!(matches!(err, PlantError::SocketVacant(_)));
    }

    #[test]
    fn identical_inputs_replay_bit_identically() {
        let run = || {
            let mut plant = one_socket(true);
            plant
                .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(19.0, 1.71, 0.09))
                .unwrap();
            plant.set_commands(&socket(), 0, &[3.68, 2.2, 1.4, 3.1]).unwrap();
            (0..4).flat_map(|slot| plant.execute_slot(slot)).collect::<Vec<_>>()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn hardware_current_limit_caps_the_offer() {
        let mut plant = Plant::new(
            5,
            vec![SocketConfig { id: socket(), phases: 1, max_amps: 10, quantize: true }],
        );
        plant
            .plug_in(&socket(), SessionId::from("S001"), BatteryState::new(22.0, 2.0, 0.0))
            .unwrap();
        plant.set_commands(&socket(), 0, &[3.68]).unwrap(); // wants 16 A
        let r = &plant.execute_slot(0)[0];
        assert_eq!(r.offered_amps, 10);
        assert!((r.offered_kw - 2.3).abs() < 1e-12);
    }
}
