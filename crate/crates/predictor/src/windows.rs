//! Sliding training windows over an occupancy series.

use hvac_core::domain::cyclic_encode;

use crate::error::{PredictorError, Result};

/// Features of one past step: occupancy, sin and cos of the time of day.
pub type PastStep = [f64; 3];
/// Time features of one future step.
pub type FutureStep = [f64; 2];

/// One sample anchored at series position `t`: inputs for `t-h..=t`, targets for `t+1..=t+H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t: usize,
    pub past: Vec<PastStep>,
    pub future: Vec<FutureStep>,
    pub targets: Vec<f64>,
}

fn tau(clock: usize, cycle: usize) -> Result<FutureStep> {
    let (s, c) = cyclic_encode(clock % cycle, cycle)?;
    Ok([s, c])
}

/// Past inputs for a window of occupancy values ending at `clock_now`.
pub fn past_features(window: &[bool], clock_now: usize, cycle: usize) -> Result<Vec<PastStep>> {
    let n = window.len();
    window
        .iter()
        .enumerate()
        .map(|(k, &o)| {
            // position k sits n-1-k steps before now
            let clock = (clock_now + cycle * n - (n - 1 - k)) % cycle;
            let [s, c] = tau(clock, cycle)?;
            Ok([f64::from(u8::from(o)), s, c])
        })
        .collect()
}

/// Time features for steps `now+1..=now+horizon`.
pub fn future_features(clock_now: usize, horizon: usize, cycle: usize) -> Result<Vec<FutureStep>> {
    (1..=horizon).map(|j| tau(clock_now + j, cycle)).collect()
}

/// Every window of `occupancy` whose past and future both fit inside the series.
/// `clock_offset` is the time-of-day index of the first element.
pub fn build_training_windows(
    occupancy: &[bool],
    clock_offset: usize,
    cycle_steps: usize,
    past_horizon: usize,
    future_horizon: usize,
) -> Result<Vec<Window>> {
    let need = past_horizon + future_horizon;
    if occupancy.len() <= need {
        return Err(PredictorError::SeriesTooShort {
            required: need,
            available: occupancy.len(),
        });
    }
    if cycle_steps == 0 {
        return Err(PredictorError::InvalidConfig("cycle_steps must be positive".into()));
    }
    (past_horizon..occupancy.len() - future_horizon)
        .map(|t| {
            let clock = (clock_offset + t) % cycle_steps;
            Ok(Window {
                t,
                past: past_features(&occupancy[t - past_horizon..=t], clock, cycle_steps)?,
                future: future_features(clock, future_horizon, cycle_steps)?,
                targets: occupancy[t + 1..=t + future_horizon]
                    .iter()
                    .map(|&o| f64::from(u8::from(o)))
                    .collect(),
            })
        })
        .collect()
}


/// Deterministic daily pattern: occupied for clock indices in `[on_from, on_until)`.
pub fn square_wave(days: usize, cycle_steps: usize, on_from: usize, on_until: usize) -> Vec<bool> {
    (0..days * cycle_steps)
        .map(|i| (on_from..on_until).contains(&(i % cycle_steps)))
        .collect()
}
