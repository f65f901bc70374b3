//! Desk-scale synthetic traces standing in for non-bundled datasets.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{substream, ExogenousTraces, RunRng, Substream};
use crate::error::{Error, Result};

/// Shape of the generated traces. All times are hours of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthProfile {
    pub temp_mean_degc: f64,
    pub temp_daily_amplitude_degc: f64,
    /// Hour of the daily maximum.
    pub temp_peak_hour: f64,
    /// Std of the day-to-day mean shift.
    pub temp_day_sd_degc: f64,
    pub temp_noise_sd_degc: f64,
    pub temp_min_degc: f64,
    pub temp_max_degc: f64,

    pub price_base_per_mwh: f64,
    pub price_morning_peak_per_mwh: f64,
    pub price_evening_peak_per_mwh: f64,
    pub price_night_dip_per_mwh: f64,
    pub price_noise_sd_per_mwh: f64,
    /// Probability per step that a spike starts.
    pub price_spike_prob: f64,
    pub price_spike_min_per_mwh: f64,
    pub price_spike_max_per_mwh: f64,

    pub weekday_leave_hour: f64,
    pub weekday_return_hour: f64,
    pub leave_jitter_hours: f64,
    pub return_jitter_hours: f64,
    /// Chance of an extra evening outing on a weekday.
    pub evening_outing_prob: f64,
    /// Chance of a daytime outing on a weekend day.
    pub weekend_outing_prob: f64,
    /// Day-of-week of index 0 (0 = Monday).
    pub first_weekday: usize,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            temp_mean_degc: 11.0,
            temp_daily_amplitude_degc: 4.0,
            temp_peak_hour: 15.0,
            temp_day_sd_degc: 1.5,
            temp_noise_sd_degc: 0.4,
            temp_min_degc: 2.0,
            temp_max_degc: 20.0,

            price_base_per_mwh: 90.0,
            price_morning_peak_per_mwh: 70.0,
            price_evening_peak_per_mwh: 140.0,
            price_night_dip_per_mwh: 40.0,
            price_noise_sd_per_mwh: 12.0,
            price_spike_prob: 0.005,
            price_spike_min_per_mwh: 300.0,
            price_spike_max_per_mwh: 1200.0,

            weekday_leave_hour: 9.0,
            weekday_return_hour: 17.5,
            leave_jitter_hours: 0.5,
            return_jitter_hours: 0.75,
            evening_outing_prob: 0.25,
            weekend_outing_prob: 0.7,
            first_weekday: 0,
        }
    }
}

impl SynthProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.temp_min_degc < self.temp_max_degc) {
            return Err(Error::InvalidConfig(
                "temp_min_degc must be below temp_max_degc".into(),
            ));
        }
        for (name, p) in [
            ("price_spike_prob", self.price_spike_prob),
            ("evening_outing_prob", self.evening_outing_prob),
            ("weekend_outing_prob", self.weekend_outing_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.weekday_leave_hour < self.weekday_return_hour) {
            return Err(Error::InvalidConfig(
                "weekday_leave_hour must precede weekday_return_hour".into(),
            ));
        }
        Ok(())
    }
}

const STEPS_PER_HOUR: usize = 4;
const STEPS_PER_DAY: usize = 24 * STEPS_PER_HOUR;

fn hour_to_step(h: f64) -> usize {
    (h * STEPS_PER_HOUR as f64).round().clamp(0.0, STEPS_PER_DAY as f64) as usize
}

/// Generate `days` of 15-minute traces starting at midnight. Deterministic in `seed`.
pub fn synth_traces(days: usize, seed: u64, profile: &SynthProfile) -> Result<ExogenousTraces> {
    if days == 0 {
        return Err(Error::InvalidConfig("days must be at least 1".into()));
    }
    profile.validate()?;
    let n = days * STEPS_PER_DAY;
    let t_out = synth_temperature(days, profile, &mut substream(seed, Substream::Synth, 0));
    let rho = synth_price(days, profile, &mut substream(seed, Substream::Synth, 1));
    let occ = synth_occupancy(days, profile, &mut substream(seed, Substream::Synth, 2));
    debug_assert!(t_out.len() == n && rho.len() == n && occ.len() == n);
    ExogenousTraces::new(t_out, rho, occ, 0.25, STEPS_PER_DAY, 0)
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd.max(0.0)).expect("finite sd")
}

fn synth_temperature(days: usize, p: &SynthProfile, rng: &mut RunRng) -> Vec<f64> {
    let day_shift = normal(p.temp_day_sd_degc);
    let noise = normal(p.temp_noise_sd_degc);
    let mut out = Vec::with_capacity(days * STEPS_PER_DAY);
    let mut shift = 0.0;
    for _ in 0..days {
        // AR(1) drift of the daily mean
        shift = 0.6 * shift + day_shift.sample(rng);
        for s in 0..STEPS_PER_DAY {
            let hour = s as f64 / STEPS_PER_HOUR as f64;
            let phase = 2.0 * PI * (hour - p.temp_peak_hour) / 24.0;
            let v = p.temp_mean_degc + shift + p.temp_daily_amplitude_degc * phase.cos()
                + noise.sample(rng);
            out.push(v.clamp(p.temp_min_degc, p.temp_max_degc));
        }
    }
    out
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let z = (hour - center) / width;
    (-0.5 * z * z).exp()
}

fn synth_price(days: usize, p: &SynthProfile, rng: &mut RunRng) -> Vec<f64> {
    let noise = normal(p.price_noise_sd_per_mwh);
    let mut out = Vec::with_capacity(days * STEPS_PER_DAY);
    let mut spike_left = 0usize;
    let mut spike_level = 0.0;
    for _ in 0..days {
        for s in 0..STEPS_PER_DAY {
            let hour = s as f64 / STEPS_PER_HOUR as f64;
            let mut v = p.price_base_per_mwh
                + p.price_morning_peak_per_mwh * bump(hour, 8.0, 1.2)
                + p.price_evening_peak_per_mwh * bump(hour, 18.5, 1.6)
                - p.price_night_dip_per_mwh * bump(hour, 3.5, 2.0)
                + noise.sample(rng);
            if spike_left == 0 && rng.random_bool(p.price_spike_prob) {
                spike_left = rng.random_range(1..=4);
                spike_level = rng.random_range(p.price_spike_min_per_mwh..=p.price_spike_max_per_mwh);
            }
            if spike_left > 0 {
                v += spike_level;
                spike_left -= 1;
            }
            out.push(v / 1000.0);
        }
    }
    out
}

/// Alternating home/away sojourns: weekdays away over working hours with
/// jittered transitions and an occasional evening outing; weekends with an
/// occasional daytime outing.
fn synth_occupancy(days: usize, p: &SynthProfile, rng: &mut RunRng) -> Vec<bool> {
    let leave_jitter = normal(p.leave_jitter_hours);
    let return_jitter = normal(p.return_jitter_hours);
    let mut out = Vec::with_capacity(days * STEPS_PER_DAY);
    for d in 0..days {
        let mut home = [true; STEPS_PER_DAY];
        let mut away = |from_h: f64, to_h: f64| {
            let (a, b) = (hour_to_step(from_h), hour_to_step(to_h));
            home.iter_mut().take(b).skip(a).for_each(|h| *h = false);
        };
        let weekday = (p.first_weekday + d) % 7 < 5;
        if weekday {
            let leave = (p.weekday_leave_hour + leave_jitter.sample(rng)).clamp(6.0, 12.0);
            let ret = (p.weekday_return_hour + return_jitter.sample(rng)).clamp(leave + 4.0, 21.0);
            away(leave, ret);
            if rng.random_bool(p.evening_outing_prob) {
                let start = (ret + rng.random_range(0.75..2.0)).min(22.5);
                let len = rng.random_range(1.0..2.5);
                away(start, (start + len).min(23.75));
            }
        } else if rng.random_bool(p.weekend_outing_prob) {
            let start = rng.random_range(10.0..14.0);
            let len = rng.random_range(1.5..4.0);
            away(start, start + len);
        }
        out.extend_from_slice(&home);
    }
    out
}
