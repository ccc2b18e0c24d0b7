//! Charging-current quantization and pilot-signal encoding.
//!
//! Station hardware regulates charging by advertising a whole-ampere current
//! limit through the control-pilot duty cycle, so a continuous power
//! setpoint must be rounded down to a realizable current. Below the 6 A
//! hardware minimum the only option is not to charge at all.

/// Nominal phase voltage (V).
pub const PHASE_VOLTAGE: f64 = 230.0;

/// Smallest advertisable charging current (A).
pub const MIN_AMPS: u32 = 6;

/// Largest advertisable charging current (A).
pub const MAX_AMPS: u32 = 80;

/// Rounds a power setpoint (kW) down to the largest realizable whole-ampere
/// current for a socket with the given phase count; currents below the 6 A
/// minimum collapse to 0 A.
///
/// The epsilon guard keeps setpoints that are *exactly* n amps (up to float
/// noise) from being knocked down to n - 1.
pub fn setpoint_to_amps(setpoint_kw: f64, phases: u8) -> u32 {
    if setpoint_kw <= 0.0 {
        return 0;
    }
    let amps_exact = setpoint_kw * 1000.0 / (f64::from(phases) * PHASE_VOLTAGE);
    let amps = (amps_exact + 1e-9).floor() as u32;
    if amps < MIN_AMPS {
        0
    } else {
        amps.min(MAX_AMPS)
    }
}

/// Power actually offered when advertising `amps` on `phases` phases (kW).
pub fn amps_to_kw(amps: u32, phases: u8) -> f64 {
    f64::from(amps) * f64::from(phases) * PHASE_VOLTAGE / 1000.0
}

/// Quantizes a power setpoint: (advertised amps, offered power in kW).
pub fn quantize_setpoint(setpoint_kw: f64, phases: u8) -> (u32, f64) {
    let amps = setpoint_to_amps(setpoint_kw, phases);
    (amps, amps_to_kw(amps, phases))
}

/// Smallest admissible on-fraction for a charger: the 6 A minimum current
/// expressed as a fraction of its maximum power.
pub fn min_on_fraction_for(max_power_kw: f64, phases: u8) -> f64 {
    amps_to_kw(MIN_AMPS, phases) / max_power_kw
}

/// Control-pilot duty cycle advertising a current limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PilotDuty {
    /// No charging allowed (pilot held at 100% / state without PWM).
    NoCharge,
    /// PWM duty cycle in percent.
    Duty(f64),
    /// The requested current cannot be encoded.
    OutOfRange,
}

/// Encodes a whole-ampere current limit as a pilot duty cycle: 6–51 A map to
/// `A / 0.6` percent, 51–80 A to `A / 2.5 + 64` percent.
pub fn amps_to_duty(amps: u32) -> PilotDuty {
    match amps {
        0 => PilotDuty::NoCharge,
        6..=51 => PilotDuty::Duty(f64::from(amps) / 0.6),
        52..=80 => PilotDuty::Duty(f64::from(amps) / 2.5 + 64.0),
        _ => PilotDuty::OutOfRange,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_power_single_phase_is_sixteen_amps() {
        assert_eq!(setpoint_to_amps(3.68, 1), 16);
        let (amps, offered) = quantize_setpoint(3.68, 1);
        assert_eq!(amps, 16);
        assert!((offered - 3.68).abs() < 1e-12);
    }

    #[test]
    fn fractional_amps_round_down() {
        // 3.5 kW is 15.217 A: must offer 15 A, not 16.
        assert_eq!(setpoint_to_amps(3.5, 1), 15);
        let (_, offered) = quantize_setpoint(3.5, 1);
        assert!((offered - 3.45).abs() < 1e-12);
    }

    #[test]
    fn minimum_level_hits_exactly_six_amps() {
        assert_eq!(setpoint_to_amps(0.375 * 3.68, 1), 6);
    }

    #[test]
    fn below_minimum_collapses_to_zero() {
        assert_eq!(setpoint_to_amps(1.3, 1), 0);
        assert_eq!(setpoint_to_amps(0.0, 1), 0);
        assert_eq!(setpoint_to_amps(-1.0, 1), 0);
    }

    #[test]
    fn three_phase_setpoints_divide_across_phases() {
        // 11.04 kW over three phases is 16 A per phase.
        assert_eq!(setpoint_to_amps(11.04, 3), 16);
        assert!((amps_to_kw(16, 3) - 11.04).abs() < 1e-12);
    }

    #[test]
    fn currents_cap_at_the_hardware_maximum() {
        assert_eq!(setpoint_to_amps(100.0, 1), 80);
    }

    #[test]
    fn quantization_error_is_below_one_amp_step() {
        for phases in [1u8, 3] {
            let step = amps_to_kw(1, phases);
            let mut setpoint = amps_to_kw(MIN_AMPS, phases);
            while setpoint < amps_to_kw(MAX_AMPS, phases) {
                let (_, offered) = quantize_setpoint(setpoint, phases);
                assert!(offered <= setpoint + 1e-9, "offered above setpoint at {setpoint}");
                assert!(
                    setpoint - offered < step + 1e-9,
                    "more than one step below at {setpoint}"
                );
                setpoint += 0.0371; // irregular stride to hit odd fractions
            }
        }
    }

    #[test]
    fn exact_amp_setpoints_survive_float_noise() {
        // 7 A on one phase, reconstructed through a lossy float path.
        let setpoint = 7.0 * 230.0 / 1000.0 * (0.1 + 0.2) / 0.30000000000000004;
        assert_eq!(setpoint_to_amps(setpoint, 1), 7);
    }

    #[test]
    fn duty_cycle_encoding_matches_the_pilot_table() {
        assert_eq!(amps_to_duty(0), PilotDuty::NoCharge);
        match amps_to_duty(6) {
            PilotDuty::Duty(d) => assert!((d - 10.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        match amps_to_duty(16) {
            PilotDuty::Duty(d) => assert!((d - 26.666666666666668).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        match amps_to_duty(51) {
            PilotDuty::Duty(d) => assert!((d - 85.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        match amps_to_duty(80) {
            PilotDuty::Duty(d) => assert!((d - 96.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(amps_to_duty(81), PilotDuty::OutOfRange);
    }

    #[test]
    fn min_on_fraction_matches_the_hardware_floor() {
        assert!((min_on_fraction_for(3.68, 1) - 0.375).abs() < 1e-12);
        assert!((min_on_fraction_for(11.04, 3) - 0.375).abs() < 1e-12);
    }
}
