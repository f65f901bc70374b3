//! Pure transition and cost functions.

use rand::Rng;

use crate::domain::{
    Action, ComfortModel, DiscomfortIndexing, Feedback, FeedbackBuffer, RewardParams,
    ThermalParams,
};

/// Per-step decay factor `exp(-dt / rc)`.
pub fn alpha(params: &ThermalParams) -> f64 {
    (-params.dt_hours / params.rc_hours).exp()
}

/// Indoor temperature after one step under the applied (controlled) action.
pub fn thermal_step(t_in: f64, t_out: f64, controlled: Action, params: &ThermalParams) -> f64 {
    let a = alpha(params);
    let drive = t_out + params.mode.sign() * controlled.as_f64() * params.power_effect_degc;
    a * t_in + (1.0 - a) * drive
}

/// Probability that a discomforted occupant overrides, capped at `p_max`.
pub fn feedback_probability(t_in: f64, comfort: &ComfortModel) -> f64 {
    let z = (t_in - comfort.t_set_degc) / comfort.theta_range_degc;
    (z * z).min(comfort.p_max)
}

/// The action an occupant expects: on when indoor and outdoor sit strictly on
/// the same side of the setpoint, off otherwise.
pub fn expected_action(t_in: f64, t_out: f64, comfort: &ComfortModel) -> Action {
    let set = comfort.t_set_degc;
    Action::from_bit((t_in > set && t_out > set) || (t_in < set && t_out < set))
}

/// One simulated override decision. Always consumes exactly one uniform draw
/// so streams stay aligned regardless of occupancy or agreement.
pub fn simulate_feedback<R: Rng + ?Sized>(
    t_in: f64,
    t_out: f64,
    action: Action,
    occupied: bool,
    comfort: &ComfortModel,
    rng: &mut R,
) -> Feedback {
    let fires = rng.random::<f64>() < feedback_probability(t_in, comfort);
    let expected = expected_action(t_in, t_out, comfort);
    if !(occupied && fires && expected != action) {
        return Feedback::None;
    }
    match expected {
        Action::On => Feedback::TurnOn,
        Action::Off => Feedback::TurnOff,
    }
}

/// Merge the controller's action with an override.
pub fn controlled_action(action: Action, feedback: Feedback) -> Action {
    Action::from_bit(
        (action == Action::On && feedback == Feedback::None)
            || (action == Action::Off && feedback == Feedback::TurnOn),
    )
}

/// `w_i = e - e^(i/h)` for `i = 1..=h`.
pub fn discomfort_weight(i: usize, horizon: usize) -> f64 {
    std::f64::consts::E - (i as f64 / horizon as f64).exp()
}

/// Discomfort for the step whose override `f_now` has already been pushed
/// into `buffer_after_push`.
pub fn discomfort_cost(
    buffer_after_push: &FeedbackBuffer,
    f_now: Feedback,
    occupied: bool,
    params: &RewardParams,
) -> f64 {
    if f_now.is_override() {
        let h = buffer_after_push.len();
        let entries = buffer_after_push.entries();
        let skip = match params.discomfort_indexing {
            DiscomfortIndexing::IncludeCurrent => 0,
            DiscomfortIndexing::PastOnly => 1,
        };
        entries
            .iter()
            .skip(skip)
            .enumerate()
            .map(|(j, f)| discomfort_weight(j + 1, h) * f.value().unsigned_abs() as f64)
            .sum()
    } else if occupied {
        -params.epsilon_bonus
    } else {
        0.0
    }
}

/// Dollars spent this step.
pub fn energy_cost(controlled: Action, rho_per_kwh: f64, params: &ThermalParams) -> f64 {
    controlled.as_f64() * params.hvac_kw * params.dt_hours * rho_per_kwh
}
