//! Occupancy forecasts consumed by the predictor scenario.

use crate::domain::ExogenousTraces;
use crate::error::{Error, Result};

/// A learned occupancy forecaster. Implemented outside this crate.
pub trait OccupancyForecaster: Send + Sync {
    /// Number of past steps before the current one in the input window
    /// (the window holds `past_horizon() + 1` values, oldest first).
    fn past_horizon(&self) -> usize;

    fn future_horizon(&self) -> usize;

    /// Probabilities for steps `t+1..=t+future_horizon()` given occupancy
    /// `O[t-h..=t]` and the clock index of step `t`.
    fn forecast(&self, window: &[bool], clock_now: usize, cycle_steps: usize) -> Result<Vec<f64>>;

    /// Batched form of [`OccupancyForecaster::forecast`].
    fn forecast_many(
        &self,
        windows: &[Vec<bool>],
        clocks: &[usize],
        cycle_steps: usize,
    ) -> Result<Vec<Vec<f64>>> {
        windows
            .iter()
            .zip(clocks)
            .map(|(w, &c)| self.forecast(w, c, cycle_steps))
            .collect()
    }
}

/// Per-trace-step forecast vectors, indexed by absolute trace position.
///
/// Forecasts depend only on true past occupancy, never on the controller, so
/// computing them once per trace gives the same values as running the
/// forecaster inside every step.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyForecasts {
    horizon: usize,
    values: Vec<f64>,
}

impl OccupancyForecasts {
    pub fn new(horizon: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * horizon);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != horizon {
                return Err(Error::InvalidConfig(format!(
                    "forecast row {i} has length {}, expected {horizon}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidConfig(format!(
                    "forecast row {i} has values outside [0, 1]"
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { horizon, values })
    }

    /// Run `forecaster` at every step of `traces`. Windows reaching before the
    /// first sample are padded with the first value.
    pub fn compute(forecaster: &dyn OccupancyForecaster, traces: &ExogenousTraces) -> Result<Self> {
        let h = forecaster.past_horizon();
        let windows: Vec<Vec<bool>> = (0..traces.len())
            .map(|t| {
                (0..=h)
                    .map(|j| traces.occupancy[(t + j).saturating_sub(h)])
                    .collect()
            })
            .collect();
        let clocks: Vec<usize> = (0..traces.len()).map(|t| traces.clock_index(t)).collect();
        let rows = forecaster.forecast_many(&windows, &clocks, traces.cycle_steps)?;
        Self::new(forecaster.future_horizon(), rows)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.horizon).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, index: usize) -> &[f64] {
        &self.values[index * self.horizon..(index + 1) * self.horizon]
    }
}
