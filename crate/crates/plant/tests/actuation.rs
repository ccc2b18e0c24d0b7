//! Closed-loop checks across the controller/plant boundary: schedules
//! produced by the planner, executed by the simulated sockets.

use lac::{
    build_problem, estimate_capacity, solve_schedules, ChargingSession, ControllerConfig,
    DsoSignal, SessionId, SessionStatus, SocketId, SolveLimits, Tariff,
};
use plant::{amps_to_kw, BatteryState, Plant, SocketConfig};

fn session(target: f64, departure: usize, loss: f64) -> ChargingSession {
    ChargingSession {
        id: SessionId::from("S001"),
        socket: SocketId::from("CS01-1"),
        max_power_kw: 3.68,
        phases: 1,
        min_on_fraction: 0.375,
        loss_factor: loss,
        assumed_capacity_kwh: 22.0,
        soc_kwh: 2.0,
        min_soc_kwh: 0.0,
        max_soc_kwh: 22.0,
        target_soc_kwh: target,
        start_slot: 0,
        departure_slot: departure,
        accrued_cost: 0.0,
        reference_cost: None,
        status: SessionStatus::Active,
    }
}

fn plan(s: &ChargingSession, horizon: usize) -> Vec<f64> {
    let tariff = Tariff {
        prices_per_kwh: (0..horizon).map(|k| 0.1 + 0.02 * k as f64).collect(),
    };
    let signal = DsoSignal::uniform(2.0, 10.0, horizon);
    let config = ControllerConfig {
        slot_minutes: 5,
        horizon_slots: horizon,
        tracking_weight: 0.2,
        cost_cap_slack: 0.1,
        replan_period_slots: 1,
    };
    let built =
        build_problem(std::slice::from_ref(s), &tariff, &signal, &config, 0).unwrap();
    let sol = solve_schedules(&built, &config, &SolveLimits::default()).unwrap();
    assert!(!sol.relaxed);
    sol.schedules[&s.id].setpoints_kw.clone()
}

#[test]
fn exact_sockets_reproduce_the_planned_trajectory() {
    // With quantization off and the controller's assumed loss equal to the
    // true loss, the plant must land exactly on the plan's predicted SoC.
    let s = session(2.0 + 8.0 * 3.68 / 12.0 * 0.95, 12, 0.05);
    let setpoints = plan(&s, 12);
    let mut plant = Plant::new(
        5,
        vec![SocketConfig { id: s.socket.clone(), phases: 1, max_amps: 16, quantize: false }],
    );
    plant
        .plug_in(&s.socket, s.id.clone(), BatteryState::new(22.0, 2.0, 0.05))
        .unwrap();
    plant.set_commands(&s.socket, 0, &setpoints).unwrap();
    let mut readings = Vec::new();
    for slot in 0..12 {
        readings.extend(plant.execute_slot(slot));
    }
    for (r, &want) in readings.iter().zip(&setpoints) {
        assert!((r.metered_kw - want).abs() < 1e-12, "slot {}: {r:?}", r.slot);
    }
    let levels: Vec<f64> = setpoints.iter().map(|p| p / 3.68).collect();
    let predicted = lac::soc_predict(2.0, &levels, 3.68, 0.05, 1.0 / 12.0);
    let final_soc = plant.battery(&s.socket).unwrap().soc_kwh;
    assert!(
        (final_soc - predicted.last().unwrap()).abs() < 1e-9,
        "plant {final_soc} vs plan {}",
        predicted.last().unwrap()
    );
    assert!(final_soc >= s.target_soc_kwh - 1e-9);
}

#[test]
fn quantized_sockets_stay_within_one_amp_step_of_the_plan() {
    let s = session(2.0 + 8.0 * 3.68 / 12.0 * 0.95, 12, 0.05);
    let setpoints = plan(&s, 12);
    let mut plant = Plant::new(
        5,
        vec![SocketConfig { id: s.socket.clone(), phases: 1, max_amps: 16, quantize: true }],
    );
    plant
        .plug_in(&s.socket, s.id.clone(), BatteryState::new(22.0, 2.0, 0.05))
        .unwrap();
    plant.set_commands(&s.socket, 0, &setpoints).unwrap();
    let step = amps_to_kw(1, 1);
    for slot in 0..12 {
        for r in plant.execute_slot(slot) {
            assert!(r.offered_kw <= r.commanded_kw + 1e-9);
            // Positive commands are always >= the 6 A minimum (the planner's
            // semi-continuity gap matches the hardware floor), so the
            // quantized offer sits within one ampere step below the command.
            assert!(
                r.commanded_kw - r.offered_kw < step + 1e-9,
                "slot {slot}: commanded {} offered {}",
                r.commanded_kw,
                r.offered_kw
            );
        }
    }
}

#[test]
fn metered_stretch_recovers_the_true_capacity() {
    // The controller assumes 22 kWh but the real battery is 19 kWh: a
    // metered charging stretch bounded by exact SoC readings must expose the
    // truth within a couple of percent.
    let true_capacity = 19.0;
    let s = session(2.0 + 6.0 * 3.68 / 12.0, 12, 0.0);
    let setpoints = plan(&s, 12);
    let mut plant = Plant::new(
        5,
        vec![SocketConfig { id: s.socket.clone(), phases: 1, max_amps: 16, quantize: true }],
    );
    plant
        .plug_in(&s.socket, s.id.clone(), BatteryState::new(true_capacity, 2.0, 0.0))
        .unwrap();
    plant.set_commands(&s.socket, 0, &setpoints).unwrap();
    let start_pct = plant.battery(&s.socket).unwrap().soc_pct();
    let mut cumulative = 0.0;
    let mut end_pct = start_pct;
    for slot in 0..12 {
        for r in plant.execute_slot(slot) {
            cumulative = r.cumulative_energy_kwh;
            end_pct = r.soc_pct;
        }
    }
    let estimated = estimate_capacity(cumulative, start_pct, end_pct, 0.0).unwrap();
    assert!(
        (estimated - true_capacity).abs() / true_capacity < 0.02,
        "estimated {estimated} vs true {true_capacity}"
    );
}
