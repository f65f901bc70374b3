//! The building environment: thermal transition, occupant overrides, costs
//! and episode stepping.
//!
//! Within one step the order is: obtain feedback for the chosen action,
//! apply the occupancy gate, merge into the controlled action, push the
//! feedback into the buffer, price discomfort and energy, advance the indoor
//! temperature, then build the next observation.

mod dynamics;
mod feedback;
mod forecast;
mod record;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{
    cyclic_encode, Action, ComfortModel, CostBreakdown, ExogenousTraces, Feedback,
    FeedbackBuffer, Observation, ObservationLayout, OccupancyForecastSource, RewardParams,
    RunRng, ScenarioSpec, SimConfig, ThermalParams,
};
use crate::error::{Error, Result};

pub use dynamics::{
    alpha, controlled_action, discomfort_cost, discomfort_weight, energy_cost, expected_action,
    feedback_probability, simulate_feedback, thermal_step,
};
pub use feedback::{
    FeedbackContext, FeedbackDecision, FeedbackOrigin, FeedbackSource, NoFeedback,
    ScriptedFeedback, SimulatedFeedback,
};
pub use forecast::{OccupancyForecaster, OccupancyForecasts};
pub use record::{EpisodeRecord, StepRecord};

/// Everything that happened in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Observation the action was chosen from.
    pub observation: Observation,
    pub record: StepRecord,
    pub feedback_origin: FeedbackOrigin,
    /// Override supplied while unoccupied and therefore discarded.
    pub rejected_feedback: Option<Feedback>,
    pub costs: CostBreakdown,
    pub done: bool,
}

/// Read-only view of the environment for privileged controllers.
#[derive(Debug, Clone, Copy)]
pub struct EnvView<'a> {
    pub traces: &'a ExogenousTraces,
    /// Absolute trace index of the current step.
    pub index: usize,
    pub episode_step: usize,
    pub episode_len: usize,
    pub t_in: f64,
    pub thermal: &'a ThermalParams,
    pub comfort: ComfortModel,
    pub reward: RewardParams,
    pub buffer: &'a FeedbackBuffer,
}

impl EnvView<'_> {
    pub fn occupied(&self) -> bool {
        self.traces.occupancy[self.index]
    }
}

/// Inputs available to a policy at decision time.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub observation: &'a Observation,
    pub layout: ObservationLayout,
    pub view: EnvView<'a>,
}

/// A controller. Learned policies read only the observation; benchmark
/// controllers may read the privileged view.
pub trait Policy {
    fn name(&self) -> &str;

    /// Called at the start of every episode.
    fn reset(&mut self) {}

    fn act(&mut self, ctx: &DecisionContext<'_>, rng: &mut RunRng) -> Result<Action>;
}

/// Single-owner environment over shared read-only traces.
#[derive(Debug, Clone)]
pub struct Env {
    config: SimConfig,
    traces: Arc<ExogenousTraces>,
    forecasts: Option<Arc<OccupancyForecasts>>,
    layout: ObservationLayout,
    start: usize,
    len: usize,
    step: usize,
    t_in: f64,
    buffer: FeedbackBuffer,
    obs: Observation,
}

impl Env {
    /// `forecasts` is required (and only used) when the scenario reads a
    /// predictor forecast; it must be indexed like `traces`.
    pub fn new(
        config: SimConfig,
        traces: Arc<ExogenousTraces>,
        forecasts: Option<Arc<OccupancyForecasts>>,
    ) -> Result<Self> {
        config.validate()?;
        traces.validate()?;
        if (traces.dt_hours - config.thermal.dt_hours).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "trace step {} h differs from thermal dt {} h",
                traces.dt_hours, config.thermal.dt_hours
            )));
        }
        let scenario = config.scenario;
        if scenario.occupancy_forecast_source == OccupancyForecastSource::Predictor {
            match &forecasts {
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "{} needs predictor forecasts",
                        scenario.id
                    )))
                }
                Some(f) if f.len() != traces.len() || f.horizon() != scenario.h_o => {
                    return Err(Error::InvalidConfig(format!(
                        "forecasts cover {} steps x {}, traces have {} steps and h_o = {}",
                        f.len(),
                        f.horizon(),
                        traces.len(),
                        scenario.h_o
                    )))
                }
                Some(_) => {}
            }
        }
        if traces.is_empty() {
            return Err(Error::EmptySeries);
        }
        let layout = scenario.layout(config.reward.feedback_horizon);
        let buffer = FeedbackBuffer::new(config.reward.feedback_horizon);
        let t_in = config.comfort.t_set_degc;
        let mut env = Self {
            config,
            traces,
            forecasts,
            layout,
            start: 0,
            len: 0,
            step: 0,
            t_in,
            buffer,
            obs: Observation {
                t_in,
                t_out: 0.0,
                tau: (0.0, 1.0),
                t_out_forecast: vec![],
                occupancy_now: None,
                occupancy_forecast: None,
                feedback: vec![],
                rho_now: 0.0,
                rho_forecast: vec![],
            },
        };
        let len = env.config.episode.steps.min(env.traces.len());
        env.reset(0, len)?;
        Ok(env)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.config.scenario
    }

    pub fn traces(&self) -> &Arc<ExogenousTraces> {
        &self.traces
    }

    pub fn layout(&self) -> ObservationLayout {
        self.layout
    }

    /// Start an episode of `len` steps at absolute trace index `start`, with
    /// indoor temperature at the setpoint and an empty feedback buffer.
    pub fn reset(&mut self, start: usize, len: usize) -> Result<&Observation> {
        let t_set = self.config.comfort.t_set_degc;
        self.reset_with(start, len, t_set)
    }

    pub fn reset_with(&mut self, start: usize, len: usize, t_in: f64) -> Result<&Observation> {
        if len == 0 || start + len > self.traces.len() {
            return Err(Error::InsufficientData {
                required: start + len.max(1),
                available: self.traces.len(),
            });
        }
        if !t_in.is_finite() {
            return Err(Error::Domain(format!("initial t_in must be finite, got {t_in}")));
        }
        self.start = start;
        self.len = len;
        self.step = 0;
        self.t_in = t_in;
        self.buffer = FeedbackBuffer::new(self.config.reward.feedback_horizon);
        self.obs = self.observe();
        Ok(&self.obs)
    }

    /// Number of whole episodes of the configured length in the traces.
    pub fn episode_starts(&self) -> Vec<usize> {
        let n = self.config.episode.steps;
        (0..self.traces.len() / n).map(|d| d * n).collect()
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn t_in(&self) -> f64 {
        self.t_in
    }

    pub fn buffer(&self) -> &FeedbackBuffer {
        &self.buffer
    }

    pub fn episode_step(&self) -> usize {
        self.step
    }

    pub fn episode_len(&self) -> usize {
        self.len
    }

    pub fn index(&self) -> usize {
        self.start + self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.len
    }

    pub fn occupied_now(&self) -> bool {
        self.traces.occupancy[self.index().min(self.traces.len() - 1)]
    }

    pub fn view(&self) -> EnvView<'_> {
        EnvView {
            traces: &self.traces,
            index: self.index().min(self.traces.len() - 1),
            episode_step: self.step,
            episode_len: self.len,
            t_in: self.t_in,
            thermal: &self.config.thermal,
            comfort: self.config.comfort_model(),
            reward: self.config.reward_params(),
            buffer: &self.buffer,
        }
    }

    pub fn decision_context(&self) -> DecisionContext<'_> {
        DecisionContext {
            observation: &self.obs,
            layout: self.layout,
            view: self.view(),
        }
    }

    fn lookahead<T: Copy>(&self, series: &[T], i: usize, h: usize) -> Vec<T> {
        let last = series.len() - 1;
        (1..=h).map(|j| series[(i + j).min(last)]).collect()
    }

    fn observe(&self) -> Observation {
        let i = self.index().min(self.traces.len() - 1);
        let tr = &self.traces;
        let s = &self.config.scenario;
        let tau = cyclic_encode(tr.clock_index(i), tr.cycle_steps).expect("cycle validated");
        let occupancy_forecast = match s.occupancy_forecast_source {
            OccupancyForecastSource::None => None,
            OccupancyForecastSource::Perfect => Some(
                self.lookahead(&tr.occupancy, i, s.h_o)
                    .into_iter()
                    .map(|o| o as u8 as f64)
                    .collect(),
            ),
            OccupancyForecastSource::Predictor => {
                Some(self.forecasts.as_ref().expect("checked in new").at(i).to_vec())
            }
        };
        Observation {
            t_in: self.t_in,
            t_out: tr.t_out_degc[i],
            tau,
            t_out_forecast: self.lookahead(&tr.t_out_degc, i, s.h_t),
            occupancy_now: s
                .include_occupancy_now
                .then(|| tr.occupancy[i] as u8 as f64),
            occupancy_forecast,
            feedback: self.buffer.values().collect(),
            rho_now: tr.rho_per_kwh[i],
            rho_forecast: self.lookahead(&tr.rho_per_kwh, i, s.h_rho),
        }
    }

    pub fn step(&mut self, action: Action, source: &mut dyn FeedbackSource) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished(self.step));
        }
        let i = self.index();
        let t_out = self.traces.t_out_degc[i];
        let rho = self.traces.rho_per_kwh[i];
        let occupied = self.traces.occupancy[i];
        let comfort = self.config.comfort_model();
        let reward_params = self.config.reward_params();

        let decision = source.feedback(&FeedbackContext {
            episode_step: self.step,
            t_in: self.t_in,
            t_out,
            action,
            occupied,
            comfort,
        })?;
        let (feedback, origin, rejected) = if occupied || !decision.value.is_override() {
            (decision.value, decision.origin, None)
        } else {
            (Feedback::None, FeedbackOrigin::None, Some(decision.value))
        };
        let origin = if feedback.is_override() {
            origin
        } else {
            FeedbackOrigin::None
        };

        let applied = controlled_action(action, feedback);
        self.buffer.push(feedback);
        let discomfort = discomfort_cost(&self.buffer, feedback, occupied, &reward_params);
        let energy = energy_cost(applied, rho, &self.config.thermal);
        let costs = CostBreakdown::new(discomfort, energy, reward_params.beta);
        let next_t_in = thermal_step(self.t_in, t_out, applied, &self.config.thermal);

        let record = StepRecord {
            step: self.step,
            clock_index: self.traces.clock_index(i),
            t_in: self.t_in,
            t_out,
            rho,
            occupied,
            action,
            feedback,
            controlled_action: applied,
            discomfort,
            energy,
            total: costs.total,
            reward: costs.reward,
            next_t_in,
        };

        self.t_in = next_t_in;
        self.step += 1;
        let next_obs = self.observe();
        let prev_obs = std::mem::replace(&mut self.obs, next_obs);
        Ok(StepOutcome {
            observation: prev_obs,
            record,
            feedback_origin: origin,
            rejected_feedback: rejected,
            costs,
            done: self.is_done(),
        })
    }
}

/// Run one episode of `len` steps from absolute index `start`.
pub fn run_episode(
    env: &mut Env,
    start: usize,
    len: usize,
    policy: &mut dyn Policy,
    source: &mut dyn FeedbackSource,
    rng: &mut RunRng,
) -> Result<EpisodeRecord> {
    env.reset(start, len)?;
    policy.reset();
    let mut record = EpisodeRecord::new(env.config().episode.gamma);
    while !env.is_done() {
        let action = policy.act(&env.decision_context(), rng)?;
        let outcome = env.step(action, source)?;
        record.steps.push(outcome.record);
    }
    Ok(record)
}
