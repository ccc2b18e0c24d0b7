//! Vehicle battery model: true capacity and losses (which generally differ
//! from what the controller assumes) plus the constant-voltage taper a real
//! charging controller applies near full.

use serde::{Deserialize, Serialize};

/// Physical state of one vehicle battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// True usable capacity (kWh).
    pub capacity_kwh: f64,
    /// True state of charge (kWh).
    pub soc_kwh: f64,
    /// True charger+cable loss fraction in `[0, 1)`: this share of the
    /// grid-side energy never reaches the cells.
    pub loss_factor: f64,
    /// SoC percentage at which the vehicle starts tapering its current
    /// request; 100 disables tapering.
    pub taper_start_pct: f64,
}

impl BatteryState {
    pub fn new(capacity_kwh: f64, soc_kwh: f64, loss_factor: f64) -> Self {
        BatteryState { capacity_kwh, soc_kwh, loss_factor, taper_start_pct: 85.0 }
    }

    pub fn soc_pct(&self) -> f64 {
        self.soc_kwh / self.capacity_kwh * 100.0
    }

    /// SoC percentage as the vehicle reports it: whole points only.
    pub fn reported_soc_pct(&self) -> f64 {
        self.soc_pct().round()
    }

    /// Fraction of the offered power the vehicle actually draws at its
    /// current SoC: 1 below the taper knee, linearly down to 0 at full.
    pub fn acceptance_fraction(&self) -> f64 {
        let pct = self.soc_pct();
        if pct >= 100.0 {
            0.0
        } else if pct <= self.taper_start_pct || self.taper_start_pct >= 100.0 {
            1.0
        } else {
            (100.0 - pct) / (100.0 - self.taper_start_pct)
        }
    }
}

/// Advances the battery by one slot under `offered_kw` of available power
/// and returns the grid-side power actually drawn (what the meter sees).
///
/// The vehicle draws `offered * acceptance`, loses `loss_factor` of it in
/// the charger, and never overshoots its capacity.
pub fn step_battery(battery: &mut BatteryState, offered_kw: f64, hours: f64) -> f64 {
    if offered_kw <= 0.0 || hours <= 0.0 {
        return 0.0;
    }
    let mut drawn_kw = offered_kw * battery.acceptance_fraction();
    let to_cells = 1.0 - battery.loss_factor;
    let headroom_kwh = battery.capacity_kwh - battery.soc_kwh;
    if drawn_kw * hours * to_cells > headroom_kwh {
        drawn_kw = headroom_kwh / (hours * to_cells);
    }
    battery.soc_kwh += drawn_kw * hours * to_cells;
    if battery.soc_kwh > battery.capacity_kwh {
        battery.soc_kwh = battery.capacity_kwh;
    }
    drawn_kw
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_the_knee_all_offered_power_is_drawn() {
        let mut b = BatteryState::new(22.0, 4.0, 0.1);
        let drawn = step_battery(&mut b, 3.68, 1.0 / 12.0);
        assert!((drawn - 3.68).abs() < 1e-12);
        assert!((b.soc_kwh - (4.0 + 3.68 / 12.0 * 0.9)).abs() < 1e-12);
    }

    #[test]
    fn full_battery_draws_nothing() {
        let mut b = BatteryState::new(22.0, 22.0, 0.0);
        assert_eq!(step_battery(&mut b, 3.68, 1.0 / 12.0), 0.0);
        assert_eq!(b.soc_kwh, 22.0);
    }

    #[test]
    fn taper_halves_draw_halfway_between_knee_and_full() {
        let mut b = BatteryState::new(20.0, 18.5, 0.0); // 92.5%, knee 85%
        let drawn = step_battery(&mut b, 2.0, 1.0 / 12.0);
        assert!((drawn - 1.0).abs() < 1e-12, "drawn {drawn}");
    }

    #[test]
    fn never_charges_past_capacity() {
        let mut b = BatteryState::new(10.0, 9.999, 0.0);
        b.taper_start_pct = 100.0; // no taper, test the hard clamp alone
        let drawn = step_battery(&mut b, 80.0, 1.0);
        assert!((b.soc_kwh - 10.0).abs() < 1e-12);
        assert!((drawn - 0.001).abs() < 1e-12);
    }

    #[test]
    fn losses_divert_energy_from_the_cells_not_the_meter() {
        let mut b = BatteryState::new(22.0, 0.0, 0.2);
        let drawn = step_battery(&mut b, 3.0, 1.0);
        assert!((drawn - 3.0).abs() < 1e-12);
        assert!((b.soc_kwh - 2.4).abs() < 1e-12);
    }

    #[test]
    fn reported_soc_is_whole_points() {
        let b = BatteryState::new(22.0, 4.27, 0.0); // 19.409%
        assert!((b.soc_pct() - 19.409090909090907).abs() < 1e-12);
        assert_eq!(b.reported_soc_pct(), 19.0);
    }
}
