//! Episode metrics and run-level distribution statistics.
//!
//! Comfort metrics (violation probability, MAE to setpoint) are computed over
//! occupied steps only and are `None` when a run has no occupied step.

use hvac_core::domain::ComfortModel;
use hvac_core::env::EpisodeRecord;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub steps: usize,
    pub occupied_steps: usize,
    /// Fraction of occupied steps with `t_in` outside the comfort band.
    pub violation_probability: Option<f64>,
    /// Mean `|t_in - T_set|` over occupied steps, degC.
    pub mae_to_setpoint: Option<f64>,
    /// Dollars.
    pub energy_cost: f64,
    pub discomfort_cost: f64,
    /// `beta * discomfort + (1 - beta) * energy`, summed over steps.
    pub total_cost: f64,
    pub override_count: usize,
}

/// Summarise every step of `records`. The band is inclusive.
pub fn compute_metrics(records: &[EpisodeRecord], comfort: &ComfortModel) -> Result<MetricsSummary> {
    let steps: usize = records.iter().map(EpisodeRecord::len).sum();
    if steps == 0 {
        return Err(HarnessError::EmptyRecords);
    }
    let (lo, hi) = comfort.band();
    let mut occupied = 0usize;
    let mut violations = 0usize;
    let mut abs_err = 0.0;
    for s in records.iter().flat_map(|r| &r.steps).filter(|s| s.occupied) {
        occupied += 1;
        if s.t_in < lo || s.t_in > hi {
            violations += 1;
        }
        abs_err += (s.t_in - comfort.t_set_degc).abs();
    }
    let per_occupied = |x: f64| (occupied > 0).then(|| x / occupied as f64);
    Ok(MetricsSummary {
        episodes: records.len(),
        steps,
        occupied_steps: occupied,
        violation_probability: per_occupied(violations as f64),
        mae_to_setpoint: per_occupied(abs_err),
        energy_cost: records.iter().map(EpisodeRecord::energy_cost).sum(),
        discomfort_cost: records.iter().map(EpisodeRecord::discomfort_cost).sum(),
        total_cost: records.iter().map(EpisodeRecord::total_cost).sum(),
        override_count: records.iter().map(EpisodeRecord::override_count).sum(),
    })
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Quantile of sorted data, interpolating between order statistics at `q (n - 1)`.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    Distribution::of(values).map(|d| d.median)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
