use std::sync::Arc;

use hvac_core::domain::{
    cyclic_encode, rc_from_cooldown, substream, Action, ComfortModel, CostBreakdown,
    ExogenousTraces, Feedback, FeedbackBuffer, RewardParams, ScenarioId, ScenarioSpec, SimConfig,
    Substream, ThermalParams,
};
use hvac_core::env::{
    alpha, controlled_action, discomfort_cost, energy_cost, feedback_probability,
    simulate_feedback, thermal_step, Env, ScriptedFeedback,
};
use proptest::prelude::*;
use rand::Rng;

/// Independent form of the transition: relax toward the effective ambient.
fn thermal_oracle(t_in: f64, t_out: f64, on: bool, p: &ThermalParams) -> f64 {
    let target = t_out + if on { p.mode.sign() * p.power_effect_degc } else { 0.0 };
    target + (t_in - target) * (-p.dt_hours / p.rc_hours).exp()
}

#[test]
fn thermal_step_matches_oracle_on_random_inputs() {
    let mut rng = substream(2024, Substream::Synth, 0);
    for _ in 0..1000 {
        let p = ThermalParams {
            rc_hours: rng.random_range(1.0..40.0),
            power_effect_degc: rng.random_range(1.0..30.0),
            dt_hours: rng.random_range(0.05..1.0),
            ..ThermalParams::default()
        };
        let (t_in, t_out) = (rng.random_range(-10.0..40.0), rng.random_range(-10.0..40.0));
        let on = rng.random_bool(0.5);
        let got = thermal_step(t_in, t_out, Action::from_bit(on), &p);
        assert!((got - thermal_oracle(t_in, t_out, on, &p)).abs() < 1e-9);
    }
}

#[test]
fn geometric_convergence_to_outdoor() {
    let p = ThermalParams::default();
    let a = alpha(&p);
    let t_out = 7.0;
    let mut t = 22.0;
    for _ in 0..100 {
        let next = thermal_step(t, t_out, Action::Off, &p);
        let ratio = (next - t_out) / (t - t_out);
        assert!((ratio - a).abs() < 1e-9, "ratio {ratio}");
        t = next;
    }
}

#[test]
fn feedback_frequency_matches_probability() {
    let temps: Vec<f64> = (0..20).map(|i| 16.0 + 0.6 * i as f64).collect();
    for (k, &t_in) in temps.iter().enumerate() {
        let comfort = ComfortModel {
            p_max: if k % 2 == 0 { 1.0 } else { 0.5 },
            ..ComfortModel::default()
        };
        // outdoor on the same side as indoor makes "on" the expected action
        let t_out = if t_in < 22.0 { 5.0 } else { 30.0 };
        let expected_action = if t_in == 22.0 { Action::On } else { Action::Off };
        let mut rng = substream(k as u64, Substream::Feedback, 0);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| {
                simulate_feedback(t_in, t_out, expected_action, true, &comfort, &mut rng).is_override()
            })
            .count();
        let p = if t_in == 22.0 { 0.0 } else { feedback_probability(t_in, &comfort) };
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() <= 0.02, "t_in={t_in} p={p} freq={freq}");
    }
}

#[test]
fn rc_monotone_in_time_and_lower_bound() {
    let mut rng = substream(5, Substream::Synth, 3);
    for _ in 0..200 {
        let hi = rng.random_range(15.0..30.0);
        let lo = rng.random_range(1.0..hi - 0.5);
        let secs = rng.random_range(60.0..20_000.0);
        let base = rc_from_cooldown(lo, hi, secs).unwrap();
        assert!(rc_from_cooldown(lo, hi, secs * 1.1).unwrap() > base);
        assert!(rc_from_cooldown(lo + 0.1 * (hi - lo), hi, secs).unwrap() > base);
    }
}

#[test]
fn golden_step_vector() {
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("golden/step_vector.json")).unwrap();
    let floats = |k: &str| -> Vec<f64> {
        golden[k].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    let ints = |k: &str| -> Vec<i64> {
        golden[k].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect()
    };
    let traces = ExogenousTraces::new(
        floats("t_out"),
        floats("rho"),
        ints("occupied").iter().map(|&o| o == 1).collect(),
        0.25,
        96,
        0,
    )
    .unwrap();
    let cfg = SimConfig::for_scenario(ScenarioSpec::preset(ScenarioId::S1));
    let mut env = Env::new(cfg, Arc::new(traces), None).unwrap();
    env.reset(0, 8).unwrap();
    let script: Vec<Feedback> = ints("feedback_script")
        .iter()
        .map(|&f| Feedback::try_from(f).unwrap())
        .collect();
    let mut human = ScriptedFeedback::new(script);
    for (k, (&a, exp)) in ints("actions")
        .iter()
        .zip(golden["expected"].as_array().unwrap())
        .enumerate()
    {
        let out = env.step(Action::from_bit(a == 1), &mut human).unwrap();
        let r = out.record;
        let close = |got: f64, key: &str| {
            let want = exp[key].as_f64().unwrap();
            assert!((got - want).abs() < 1e-12, "step {k} {key}: {got} vs {want}");
        };
        close(r.t_in, "t_in");
        close(r.discomfort, "discomfort");
        close(r.energy, "energy");
        close(r.total, "total");
        close(r.reward, "reward");
        close(r.next_t_in, "next_t_in");
        assert_eq!(r.feedback.value() as i64, exp["feedback"].as_i64().unwrap());
        assert_eq!(r.controlled_action.as_u8() as i64, exp["controlled_action"].as_i64().unwrap());
    }
}

fn feedback_strategy() -> impl Strategy<Value = Feedback> {
    prop_oneof![Just(Feedback::TurnOff), Just(Feedback::None), Just(Feedback::TurnOn)]
}

proptest! {
    #[test]
    fn cyclic_encode_periodic_unit_norm(step in 0usize..100_000, cycle in 1usize..500) {
        let (s, c) = cyclic_encode(step, cycle).unwrap();
        prop_assert!((s * s + c * c - 1.0).abs() < 1e-9);
        prop_assert_eq!(cyclic_encode(step + cycle, cycle).unwrap(), (s, c));
    }

    #[test]
    fn temperature_contraction(ta in -20.0f64..40.0, tb in -20.0f64..40.0, t_out in -20.0f64..40.0, on: bool) {
        let p = ThermalParams::default();
        let a = Action::from_bit(on);
        let d = (thermal_step(ta, t_out, a, &p) - thermal_step(tb, t_out, a, &p)).abs();
        prop_assert!((d - alpha(&p) * (ta - tb).abs()).abs() < 1e-9);
    }

    #[test]
    fn feedback_only_when_occupied(t_in in 10.0f64..34.0, t_out in -5.0f64..40.0, on: bool, seed: u64) {
        let mut rng = substream(seed, Substream::Feedback, 0);
        let f = simulate_feedback(t_in, t_out, Action::from_bit(on), false, &ComfortModel::default(), &mut rng);
        prop_assert_eq!(f, Feedback::None);
    }

    #[test]
    fn reward_identity(disc in -1.0f64..50.0, energy in -1.0f64..5.0, beta in 0.0f64..=1.0) {
        let c = CostBreakdown::new(disc, energy, beta);
        prop_assert_eq!(c.total, beta * disc + (1.0 - beta) * energy);
        prop_assert_eq!(c.reward, -c.total);
    }

    #[test]
    fn step_costs_follow_definitions(
        history in proptest::collection::vec(feedback_strategy(), 16),
        f_now in feedback_strategy(),
        occupied: bool,
        on: bool,
        rho in -0.1f64..0.5,
    ) {
        let r = RewardParams::default();
        let mut buffer = FeedbackBuffer::from_entries(history).unwrap();
        buffer.push(f_now);
        let d = discomfort_cost(&buffer, f_now, occupied, &r);
        if f_now.is_override() {
            prop_assert!(d >= 1.65);
        } else if occupied {
            prop_assert_eq!(d, -r.epsilon_bonus);
        } else {
            prop_assert_eq!(d, 0.0);
        }
        let applied = controlled_action(Action::from_bit(on), f_now);
        let e = energy_cost(applied, rho, &ThermalParams::default());
        prop_assert_eq!(e, applied.as_f64() * 3.5 * 0.25 * rho);
    }
}
