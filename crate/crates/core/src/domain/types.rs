use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction the HVAC unit pushes the indoor temperature. Preset per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HvacMode {
    #[default]
    Heating,
    Cooling,
}

impl HvacMode {
    /// +1 for heating, -1 for cooling.
    pub fn sign(self) -> f64 {
        match self {
            HvacMode::Heating => 1.0,
            HvacMode::Cooling => -1.0,
        }
    }
}

/// Binary HVAC command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Off,
    On,
}

impl Action {
    pub fn from_bit(on: bool) -> Self {
        if on {
            Action::On
        } else {
            Action::Off
        }
    }

    pub fn is_on(self) -> bool {
        self == Action::On
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self.as_u8() as f64
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.as_u8()
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Action::Off),
            1 => Ok(Action::On),
            other => Err(format!("action must be 0 or 1, got {other}")),
        }
    }
}

/// Occupant override for one step: force off, none, or force on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(into = "i8", try_from = "i64")]
pub enum Feedback {
    TurnOff,
    #[default]
    None,
    TurnOn,
}

impl Feedback {
    pub fn value(self) -> i8 {
        match self {
            Feedback::TurnOff => -1,
            Feedback::None => 0,
            Feedback::TurnOn => 1,
        }
    }

    pub fn is_override(self) -> bool {
        self != Feedback::None
    }
}

impl From<Feedback> for i8 {
    fn from(f: Feedback) -> i8 {
        f.value()
    }
}

impl TryFrom<i64> for Feedback {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Feedback::TurnOff),
            0 => Ok(Feedback::None),
            1 => Ok(Feedback::TurnOn),
            other => Err(format!("feedback must be -1, 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

/// First-order RC building parameters and HVAC characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    /// Thermal time constant (resistance x capacitance), hours.
    pub rc_hours: f64,
    /// Equivalent temperature offset of the running unit, degC.
    pub power_effect_degc: f64,
    /// Electrical draw when running, kW.
    pub hvac_kw: f64,
    pub mode: HvacMode,
    /// Step length, hours.
    pub dt_hours: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            rc_hours: 16.5,
            power_effect_degc: 20.0,
            hvac_kw: 3.5,
            mode: HvacMode::Heating,
            dt_hours: 0.25,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        positive("rc_hours", self.rc_hours)?;
        positive("power_effect_degc", self.power_effect_degc)?;
        positive("hvac_kw", self.hvac_kw)?;
        positive("dt_hours", self.dt_hours)?;
        Ok(())
    }
}

/// Occupant comfort preferences and responsiveness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComfortModel {
    pub t_set_degc: f64,
    pub theta_range_degc: f64,
    /// Cap on the probability that a discomforted occupant overrides.
    pub p_max: f64,
}

impl Default for ComfortModel {
    fn default() -> Self {
        Self {
            t_set_degc: 22.0,
            theta_range_degc: 3.0,
            p_max: 1.0,
        }
    }
}

impl ComfortModel {
    pub fn validate(&self) -> Result<()> {
        positive("theta_range_degc", self.theta_range_degc)?;
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_max must lie in (0, 1], got {}",
                self.p_max
            )));
        }
        if !self.t_set_degc.is_finite() {
            return Err(Error::InvalidConfig("t_set_degc must be finite".into()));
        }
        Ok(())
    }

    /// Comfort band `[T_set - range, T_set + range]`.
    pub fn band(&self) -> (f64, f64) {
        (
            self.t_set_degc - self.theta_range_degc,
            self.t_set_degc + self.theta_range_degc,
        )
    }
}

/// Which feedback entries the discomfort sum covers when an override occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscomfortIndexing {
    /// The buffer after pushing the current override; the current override gets weight w_1.
    #[default]
    IncludeCurrent,
    /// Only the entries that existed before the current step.
    PastOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardParams {
    /// Discomfort weight in the total cost, in [0, 1].
    pub beta: f64,
    /// Magnitude of the bonus applied when occupied without feedback.
    pub epsilon_bonus: f64,
    /// Length of the feedback buffer, steps.
    pub feedback_horizon: usize,
    #[serde(default)]
    pub discomfort_indexing: DiscomfortIndexing,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            beta: 0.5,
            epsilon_bonus: 0.01,
            feedback_horizon: 16,
            discomfort_indexing: DiscomfortIndexing::IncludeCurrent,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        positive("epsilon_bonus", self.epsilon_bonus)?;
        if self.feedback_horizon == 0 {
            return Err(Error::InvalidConfig(
                "feedback_horizon must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed-length override history, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBuffer {
    entries: Vec<Feedback>,
}

impl FeedbackBuffer {
    pub fn new(horizon: usize) -> Self {
        assert!(horizon >= 1, "feedback horizon must be at least 1");
        Self {
            entries: vec![Feedback::None; horizon],
        }
    }

    pub fn from_entries(entries: Vec<Feedback>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("feedback buffer cannot be empty".into()));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Feedback] {
        &self.entries
    }

    /// Insert at the front and drop the oldest entry.
    pub fn push(&mut self, f: Feedback) {
        self.entries.rotate_right(1);
        self.entries[0] = f;
    }

    pub fn values(&self) -> impl Iterator<Item = i8> + '_ {
        self.entries.iter().map(|f| f.value())
    }

    pub fn override_count(&self) -> usize {
        self.entries.iter().filter(|f| f.is_override()).count()
    }
}

/// Aligned exogenous inputs on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousTraces {
    pub t_out_degc: Vec<f64>,
    /// Wholesale price, $/kWh. May be negative.
    pub rho_per_kwh: Vec<f64>,
    pub occupancy: Vec<bool>,
    pub dt_hours: f64,
    /// Steps per time-of-day cycle.
    pub cycle_steps: usize,
    /// Position of index 0 within the cycle.
    pub clock_offset: usize,
}

impl ExogenousTraces {
    pub fn new(
        t_out_degc: Vec<f64>,
        rho_per_kwh: Vec<f64>,
        occupancy: Vec<bool>,
        dt_hours: f64,
        cycle_steps: usize,
        clock_offset: usize,
    ) -> Result<Self> {
        let traces = Self {
            t_out_degc,
            rho_per_kwh,
            occupancy,
            dt_hours,
            cycle_steps,
            clock_offset,
        };
        traces.validate()?;
        Ok(traces)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t_out_degc.len();
        if self.rho_per_kwh.len() != n || self.occupancy.len() != n {
            return Err(Error::InvalidConfig(format!(
                "trace lengths differ: t_out={}, rho={}, occupancy={}",
                n,
                self.rho_per_kwh.len(),
                self.occupancy.len()
            )));
        }
        if self.cycle_steps == 0 {
            return Err(Error::InvalidConfig("cycle_steps must be at least 1".into()));
        }
        positive("dt_hours", self.dt_hours)?;
        if let Some(i) = self
            .t_out_degc
            .iter()
            .chain(&self.rho_per_kwh)
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "non-finite value at flat index {i}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t_out_degc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out_degc.is_empty()
    }

    /// Absolute clock index of step `i`, used for the time-of-day encoding.
    pub fn clock_index(&self, i: usize) -> usize {
        self.clock_offset + i
    }

    pub fn steps_per_day(&self) -> usize {
        (24.0 / self.dt_hours).round() as usize
    }

    /// Contiguous sub-range `[start, start + len)`, keeping the clock aligned.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InsufficientData {
                required: start + len,
                available: self.len(),
            });
        }
        Ok(Self {
            t_out_degc: self.t_out_degc[start..start + len].to_vec(),
            rho_per_kwh: self.rho_per_kwh[start..start + len].to_vec(),
            occupancy: self.occupancy[start..start + len].to_vec(),
            dt_hours: self.dt_hours,
            cycle_steps: self.cycle_steps,
            clock_offset: (self.clock_offset + start) % self.cycle_steps,
        })
    }

    pub fn occupancy_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.occupancy.iter().filter(|&&o| o).count() as f64 / self.len() as f64
    }
}

/// Observation vector components in state order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t_in: f64,
    pub t_out: f64,
    pub tau: (f64, f64),
    pub t_out_forecast: Vec<f64>,
    pub occupancy_now: Option<f64>,
    pub occupancy_forecast: Option<Vec<f64>>,
    pub feedback: Vec<i8>,
    pub rho_now: f64,
    pub rho_forecast: Vec<f64>,
}

/// Sizes of the variable-length observation blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub h_t: usize,
    pub h_o: usize,
    pub h_rho: usize,
    pub h_f: usize,
}

impl ObservationLayout {
    pub fn dim(&self) -> usize {
        // t_in, t_out, tau(2), occupancy_now, rho_now
        6 + self.h_t + self.h_o + self.h_rho + self.h_f
    }
}

impl Observation {
    /// Flatten into the fixed-width vector fed to policies. Absent fields are zero-filled.
    pub fn to_vector(&self, layout: &ObservationLayout) -> Vec<f64> {
        let mut v = Vec::with_capacity(layout.dim());
        v.push(self.t_in);
        v.push(self.t_out);
        v.push(self.tau.0);
        v.push(self.tau.1);
        v.extend_from_slice(&self.t_out_forecast);
        v.push(self.occupancy_now.unwrap_or(0.0));
        match &self.occupancy_forecast {
            Some(f) => v.extend_from_slice(f),
            None => v.extend(std::iter::repeat_n(0.0, layout.h_o)),
        }
        v.extend(self.feedback.iter().map(|&f| f as f64));
        v.push(self.rho_now);
        v.extend_from_slice(&self.rho_forecast);
        debug_assert_eq!(v.len(), layout.dim());
        v
    }

    /// Per-entry presence flags matching [`Observation::to_vector`].
    pub fn presence_mask(&self, layout: &ObservationLayout) -> Vec<bool> {
        let mut m = Vec::with_capacity(layout.dim());
        m.extend(std::iter::repeat_n(true, 4 + layout.h_t));
        m.push(self.occupancy_now.is_some());
        m.extend(std::iter::repeat_n(
            self.occupancy_forecast.is_some(),
            layout.h_o,
        ));
        m.extend(std::iter::repeat_n(true, layout.h_f + 1 + layout.h_rho));
        m
    }
}

/// Per-step cost components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub discomfort: f64,
    /// Dollars.
    pub energy: f64,
    pub total: f64,
    pub reward: f64,
}

impl CostBreakdown {
    pub fn new(discomfort: f64, energy: f64, beta: f64) -> Self {
        let total = beta * discomfort + (1.0 - beta) * energy;
        Self {
            discomfort,
            energy,
            total,
            reward: -total,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId::S1, ScenarioId::S2, ScenarioId::S3, ScenarioId::S4];
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioId::S1 => "S1",
            ScenarioId::S2 => "S2",
            ScenarioId::S3 => "S3",
            ScenarioId::S4 => "S4",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(ScenarioId::S1),
            "S2" => Ok(ScenarioId::S2),
            "S3" => Ok(ScenarioId::S3),
            "S4" => Ok(ScenarioId::S4),
            other => Err(Error::InvalidConfig(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupancyForecastSource {
    Perfect,
    None,
    Predictor,
}

/// Observation-masking regime plus the run-level knobs that vary per experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub include_occupancy_now: bool,
    pub occupancy_forecast_source: OccupancyForecastSource,
    pub h_t: usize,
    pub h_o: usize,
    pub h_rho: usize,
    pub p_max: f64,
    pub beta: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Two-hour forecast horizons at 15-minute resolution.
    pub const DEFAULT_HORIZON: usize = 8;

    pub fn preset(id: ScenarioId) -> Self {
        let (include_occupancy_now, occupancy_forecast_source) = match id {
            ScenarioId::S1 => (true, OccupancyForecastSource::Perfect),
            ScenarioId::S2 => (false, OccupancyForecastSource::None),
            ScenarioId::S3 => (true, OccupancyForecastSource::None),
            ScenarioId::S4 => (true, OccupancyForecastSource::Predictor),
        };
        Self {
            id,
            include_occupancy_now,
            occupancy_forecast_source,
            h_t: Self::DEFAULT_HORIZON,
            h_o: Self::DEFAULT_HORIZON,
            h_rho: Self::DEFAULT_HORIZON,
            p_max: 1.0,
            beta: 0.5,
            seed: 0,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_p_max(mut self, p_max: f64) -> Self {
        self.p_max = p_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let expected = Self::preset(self.id);
        if self.include_occupancy_now != expected.include_occupancy_now
            || self.occupancy_forecast_source != expected.occupancy_forecast_source
        {
            return Err(Error::InvalidConfig(format!(
                "{} requires include_occupancy_now={} and occupancy_forecast_source={:?}",
                self.id, expected.include_occupancy_now, expected.occupancy_forecast_source
            )));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_max must lie in (0, 1], got {}",
                self.p_max
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn layout(&self, feedback_horizon: usize) -> ObservationLayout {
        ObservationLayout {
            h_t: self.h_t,
            h_o: self.h_o,
            h_rho: self.h_rho,
            h_f: feedback_horizon,
        }
    }
}

/// Time-of-day encoding on the unit circle.
pub fn cyclic_encode(step_index: usize, cycle_steps: usize) -> Result<(f64, f64)> {
    if cycle_steps == 0 {
        return Err(Error::InvalidConfig("cycle_steps must be at least 1".into()));
    }
    // Reduce first so the encoding is exactly periodic.
    let phase = (step_index % cycle_steps) as f64 / cycle_steps as f64;
    let angle = 2.0 * PI * phase;
    Ok((angle.sin(), angle.cos()))
}

/// Thermal time constant in hours from an observed passive cool-down from
/// `t_upper` to `t_lower` taking `t_cool_seconds`.
pub fn rc_from_cooldown(t_lower: f64, t_upper: f64, t_cool_seconds: f64) -> Result<f64> {
    if !(t_lower > 0.0) {
        return Err(Error::Domain(format!("t_lower must be positive, got {t_lower}")));
    }
    if !(t_lower < t_upper) {
        return Err(Error::Domain(format!(
            "t_lower ({t_lower}) must be below t_upper ({t_upper})"
        )));
    }
    if !(t_cool_seconds > 0.0) {
        return Err(Error::Domain(format!(
            "t_cool_seconds must be positive, got {t_cool_seconds}"
        )));
    }
    // ln((lo/hi)^(1/t)) == ln(lo/hi) / t
    let log_rate = (t_lower / t_upper).ln() / t_cool_seconds;
    Ok(-1.0 / (3600.0 * log_rate))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}
