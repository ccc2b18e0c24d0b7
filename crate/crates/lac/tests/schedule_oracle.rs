//! Cross-checks the scheduling pipeline against an exhaustive oracle on
//! small random instances: every on/off pattern of the per-slot levels is
//! enumerated and its restricted LP solved, so the best pattern is known by
//! brute force. The pipeline must match that optimum, and every schedule it
//! returns must survive the independent semantics re-check.

use lac::{
    build_problem, solve_schedules, verify_schedules, ChargingSession, ControllerConfig,
    DsoSignal, SessionId, SessionStatus, SocketId, Tariff,
};
use milp_core::{solve_lp, MilpModel, SolveLimits, SolveStatus};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

struct Instance {
    sessions: Vec<ChargingSession>,
    tariff: Tariff,
    signal: DsoSignal,
    config: ControllerConfig,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let horizon = rng.gen_range(3..=5);
    let n_sessions = rng.gen_range(1..=2);
    let mut sessions = Vec::new();
    let mut total_power = 0.0;
    for i in 0..n_sessions {
        let max_power_kw = rng.gen_range(2.0..8.0);
        let loss_factor = rng.gen_range(0.0..0.15);
        let departure_slot = rng.gen_range(2..=horizon);
        let soc_kwh = rng.gen_range(0.0..2.0);
        let max_soc_kwh = rng.gen_range(5.0..10.0);
        // Ask for anywhere between nothing and ~120% of what the window can
        // physically deliver, so both feasible and infeasible cases occur.
        let deliverable =
            departure_slot as f64 * max_power_kw / 12.0 * (1.0 - loss_factor);
        let target_soc_kwh = (soc_kwh + rng.gen_range(0.0..1.2) * deliverable)
            .min(max_soc_kwh);
        total_power += max_power_kw;
        sessions.push(ChargingSession {
            id: SessionId::from(format!("S{:03}", i + 1).as_str()),
            socket: SocketId::from(format!("CS01-{}", i + 1).as_str()),
            max_power_kw,
            phases: 1,
            min_on_fraction: rng.gen_range(0.2..0.5),
            loss_factor,
            assumed_capacity_kwh: max_soc_kwh,
            soc_kwh,
            min_soc_kwh: 0.0,
            max_soc_kwh,
            target_soc_kwh,
            start_slot: 0,
            departure_slot,
            accrued_cost: 0.0,
            reference_cost: None,
            status: SessionStatus::Active,
        });
    }
    let tariff = Tariff {
        prices_per_kwh: (0..horizon).map(|_| rng.gen_range(0.05..0.5)).collect(),
    };
    let signal = DsoSignal {
        effective_from_slot: 0,
        reference_kw: (0..horizon).map(|_| rng.gen_range(0.0..total_power)).collect(),
        limit_kw: (0..horizon)
            .map(|_| rng.gen_range(0.5 * total_power..1.2 * total_power))
            .collect(),
        weights: (0..horizon).map(|_| rng.gen_range(0.1..2.0)).collect(),
    };
    let config = ControllerConfig {
        slot_minutes: 5,
        horizon_slots: horizon,
        tracking_weight: [0.0, 0.1, 1.0][rng.gen_range(0..3)],
        cost_cap_slack: 0.1,
        replan_period_slots: 1,
    };
    Instance { sessions, tariff, signal, config }
}

/// Brute-force optimum over every on/off pattern of the level variables.
/// Returns `None` when no pattern admits a feasible LP.
fn pattern_oracle(model: &MilpModel) -> Option<f64> {
    let marks = model.semi_continuities().to_vec();
    assert!(marks.len() <= 10, "oracle only meant for tiny instances");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << marks.len()) {
        let mut restricted = model.clone();
        restricted.clear_semi_continuities();
        for (bit, mark) in marks.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                restricted.set_bounds(mark.var, mark.threshold, 1.0);
            } else {
                restricted.set_bounds(mark.var, 0.0, 0.0);
            }
        }
        let sol = solve_lp(&restricted).expect("restricted model is valid");
        if sol.status == SolveStatus::Optimal {
            best = Some(match best {
                Some(b) => b.min(sol.objective_value),
                None => sol.objective_value,
            });
        }
    }
    best
}

#[test]
fn pipeline_matches_exhaustive_pattern_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_3);
    let mut feasible = 0;
    let mut needs_relax = 0;
    for case in 0..120 {
        let inst = random_instance(&mut rng);
        let built =
            build_problem(&inst.sessions, &inst.tariff, &inst.signal, &inst.config, 0)
                .expect("instance builds");
        let oracle = pattern_oracle(&built.model);
        let sol = solve_schedules(&built, &inst.config, &SolveLimits::default())
            .expect("relaxation keeps capless instances solvable");

        match oracle {
            Some(best) => {
                feasible += 1;
                assert!(
                    !sol.relaxed,
                    "case {case}: relaxed although a strict pattern exists"
                );
                let tol = 1e-6 * (1.0 + best.abs());
                assert!(
                    (sol.objective - best).abs() <= tol,
                    "case {case}: pipeline {} vs oracle {best}",
                    sol.objective
                );
            }
            None => {
                needs_relax += 1;
                assert!(sol.relaxed, "case {case}: oracle says strict is infeasible");
                assert!(
                    !sol.shortfall_kwh.is_empty(),
                    "case {case}: relaxed solve must declare its shortfall"
                );
            }
        }

        let violations = verify_schedules(
            &inst.sessions,
            &inst.tariff,
            &inst.signal,
            &inst.config,
            &sol.schedules,
            &sol.shortfall_kwh,
            0,
            1e-9,
        );
        assert!(violations.is_empty(), "case {case}: {violations:?}");
    }
    assert!(feasible >= 30, "only {feasible} strictly feasible cases");
    assert!(needs_relax >= 10, "only {needs_relax} relaxation cases");
}

#[test]
fn decoded_objective_is_reproducible_from_the_schedules() {
    // The reported objective must equal cost + tracking + shortfall penalty
    // recomputed directly from the decoded schedules.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_4);
    for case in 0..60 {
        let inst = random_instance(&mut rng);
        let built =
            build_problem(&inst.sessions, &inst.tariff, &inst.signal, &inst.config, 0)
                .expect("instance builds");
        let sol = solve_schedules(&built, &inst.config, &SolveLimits::default()).unwrap();
        let slot_hours = inst.config.slot_hours();
        let mut cost = 0.0;
        for sched in sol.schedules.values() {
            for (i, &p) in sched.setpoints_kw.iter().enumerate() {
                cost += p * slot_hours * inst.tariff.price(sched.start_slot + i);
            }
        }
        let mut worst = 0.0f64;
        for k in 0..inst.config.horizon_slots {
            let agg: f64 = sol.schedules.values().map(|s| s.setpoint_at(k)).sum();
            worst = worst
                .max(inst.signal.weights[k] * (agg - inst.signal.reference_kw[k]).abs());
        }
        let penalty: f64 = sol.shortfall_kwh.values().sum::<f64>() * built.relax_penalty;
        let expect = cost + inst.config.tracking_weight * worst + penalty;
        let tol = 1e-6 * (1.0 + expect.abs());
        assert!(
            (sol.objective - expect).abs() <= tol,
            "case {case}: reported {} vs recomputed {expect}",
            sol.objective
        );
    }
}

#[test]
fn price_spike_sacrifices_soc_before_it_breaks_the_budget() {
    // A session whose budget was pinned under cheap prices faces a price
    // spike: the re-plan must stay under budget by shorting the target, not
    // blow the cap to reach it.
    let mut s = ChargingSession {
        id: SessionId::from("S001"),
        socket: SocketId::from("CS01-1"),
        max_power_kw: 3.68,
        phases: 1,
        min_on_fraction: 0.375,
        loss_factor: 0.0,
        assumed_capacity_kwh: 22.0,
        soc_kwh: 1.0,
        min_soc_kwh: 0.0,
        max_soc_kwh: 22.0,
        target_soc_kwh: 1.0 + 4.0 * 3.68 / 12.0,
        start_slot: 0,
        departure_slot: 6,
        accrued_cost: 0.0,
        reference_cost: None,
        status: SessionStatus::Active,
    };
    let cheap = 0.1;
    s.reference_cost = Some(4.0 * 3.68 / 12.0 * cheap);
    let spiked = Tariff::flat(cheap * 5.0, 6);
    let signal = DsoSignal::uniform(4.0, 10.0, 6);
    let config = ControllerConfig {
        slot_minutes: 5,
        horizon_slots: 6,
        tracking_weight: 0.0,
        cost_cap_slack: 0.1,
        replan_period_slots: 1,
    };
    let built =
        build_problem(std::slice::from_ref(&s), &spiked, &signal, &config, 0).unwrap();
    let sol = solve_schedules(&built, &config, &SolveLimits::default()).unwrap();
    assert!(sol.relaxed, "the cap must force a shortfall under spiked prices");
    let shortfall = sol.shortfall_kwh[&s.id];
    assert!(shortfall > 0.1, "shortfall {shortfall}");
    let spend: f64 = sol.schedules[&s.id]
        .setpoints_kw
        .iter()
        .enumerate()
        .map(|(i, &p)| p / 12.0 * spiked.price(i))
        .sum();
    let budget = 1.1 * s.reference_cost.unwrap();
    assert!(spend <= budget + 1e-9, "spend {spend} vs budget {budget}");
    let violations = verify_schedules(
        std::slice::from_ref(&s),
        &spiked,
        &signal,
        &config,
        &sol.schedules,
        &sol.shortfall_kwh,
        0,
        1e-9,
    );
    assert!(violations.is_empty(), "{violations:?}");
}

#[test]
fn schedules_for_midway_replans_only_cover_the_future() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5);
    for _ in 0..30 {
        let inst = random_instance(&mut rng);
        let now = rng.gen_range(0..2);
        let live: Vec<ChargingSession> = inst
            .sessions
            .iter()
            .filter(|s| s.departure_slot > now)
            .cloned()
            .collect();
        if live.is_empty() {
            continue;
        }
        let built =
            build_problem(&live, &inst.tariff, &inst.signal, &inst.config, now).unwrap();
        let sol = solve_schedules(&built, &inst.config, &SolveLimits::default()).unwrap();
        let mut shortfalls = BTreeMap::new();
        shortfalls.extend(sol.shortfall_kwh.clone());
        for sched in sol.schedules.values() {
            assert!(sched.start_slot >= now);
        }
        let violations = verify_schedules(
            &live,
            &inst.tariff,
            &inst.signal,
            &inst.config,
            &sol.schedules,
            &shortfalls,
            now,
            1e-9,
        );
        assert!(violations.is_empty(), "{violations:?}");
    }
}
