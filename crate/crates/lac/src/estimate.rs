//! State-of-charge bookkeeping: forward prediction from planned levels and
//! battery-capacity estimation from metered energy.

use crate::session::Slot;

/// Forward-simulates the SoC recursion used by the planner.
///
/// Returns `levels.len() + 1` values: the SoC entering each slot and the SoC
/// after the last one. Each slot adds
/// `level * max_power_kw * slot_hours * (1 - loss_factor)` kWh.
pub fn soc_predict(
    initial_soc_kwh: f64,
    levels: &[f64],
    max_power_kw: f64,
    loss_factor: f64,
    slot_hours: f64,
) -> Vec<f64> {
    let gain = max_power_kw * slot_hours * (1.0 - loss_factor);
    let mut soc = Vec::with_capacity(levels.len() + 1);
    let mut x = initial_soc_kwh;
    soc.push(x);
    for &u in levels {
        x += gain * u;
        soc.push(x);
    }
    soc
}

pub fn pct_to_kwh(pct: f64, capacity_kwh: f64) -> f64 {
    pct / 100.0 * capacity_kwh
}

pub fn kwh_to_pct(kwh: f64, capacity_kwh: f64) -> f64 {
    kwh / capacity_kwh * 100.0
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    /// The SoC moved too little over the observation window for the energy /
    /// ΔSoC quotient to mean anything.
    #[error("SoC changed by only {delta_pct} points between the readings; need at least {min_pct}")]
    DegenerateReading { delta_pct: f64, min_pct: f64 },
    #[error("metered energy must be non-negative, got {0}")]
    NegativeEnergy(f64),
}

/// Smallest SoC movement (percentage points) accepted by
/// [`estimate_capacity`]; below this, vehicle-reported SoC rounding dominates
/// the quotient.
pub const MIN_SOC_DELTA_PCT: f64 = 0.5;

/// Infers usable battery capacity (kWh) from one charging stretch:
/// grid-metered energy between two vehicle SoC readings (percent).
///
/// The charger loses `loss_factor` of the metered energy before it reaches
/// the battery, so the battery absorbed `metered * (1 - loss_factor)` kWh
/// while its SoC rose by `(end - start)` percent.
pub fn estimate_capacity(
    metered_energy_kwh: f64,
    soc_start_pct: f64,
    soc_end_pct: f64,
    loss_factor: f64,
) -> Result<f64, EstimateError> {
    if metered_energy_kwh < 0.0 {
        return Err(EstimateError::NegativeEnergy(metered_energy_kwh));
    }
    let delta = soc_end_pct - soc_start_pct;
    if delta < MIN_SOC_DELTA_PCT {
        return Err(EstimateError::DegenerateReading { delta_pct: delta, min_pct: MIN_SOC_DELTA_PCT });
    }
    Ok(metered_energy_kwh * (1.0 - loss_factor) / (delta / 100.0))
}

/// Cumulative metered energy reconciled against per-slot records: sums the
/// per-slot energies and reports the residual unexplained by them.
pub fn unaccounted_energy(cumulative_kwh: f64, slot_energies: &[(Slot, f64)]) -> f64 {
    cumulative_kwh - slot_energies.iter().map(|&(_, e)| e).sum::<f64>()
}
