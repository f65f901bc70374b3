use std::sync::Arc;

use hvac_core::domain::{substream, Action, ExogenousTraces, RunRng, SimConfig, Substream};
use hvac_core::env::{Env, OccupancyForecasts, SimulatedFeedback};
use rand::Rng;

use crate::error::Result;
use crate::gae::gae;
use crate::net::PolicyNet;

/// Outcome of one environment step as seen by the learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    /// Scalar cost for logging (the negated reward for the thermostat env).
    pub cost: f64,
    pub done: bool,
}

/// Minimal interface the trainer needs from an environment.
pub trait RolloutEnv {
    /// Raw observation of the current state.
    fn observation(&self) -> Vec<f64>;
    /// Start a new episode.
    fn reset(&mut self) -> Result<()>;
    fn step(&mut self, action: Action) -> Result<Transition>;
}

/// Thermostat environment with simulated occupant feedback and random day starts.
#[derive(Debug, Clone)]
pub struct HvacTrainEnv {
    env: Env,
    feedback: SimulatedFeedback,
    start_rng: RunRng,
    starts: Vec<usize>,
}

impl HvacTrainEnv {
    /// Worker `index` gets its own feedback and episode-start substreams of `seed`.
    pub fn new(
        config: SimConfig,
        traces: Arc<ExogenousTraces>,
        forecasts: Option<Arc<OccupancyForecasts>>,
        seed: u64,
        index: u32,
    ) -> Result<Self> {
        let env = Env::new(config, traces, forecasts)?;
        let starts = env.episode_starts();
        if starts.is_empty() {
            return Err(hvac_core::Error::InsufficientData {
                required: env.config().episode.steps,
                available: env.traces().len(),
            }
            .into());
        }
        let mut out = Self {
            env,
            feedback: SimulatedFeedback::new(substream(seed, Substream::Feedback, 1000 + index)),
            start_rng: substream(seed, Substream::EpisodeStart, index),
            starts,
        };
        out.reset()?;
        Ok(out)
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Presence mask of the observation vector for this scenario.
    pub fn mask(&self) -> Vec<bool> {
        self.env.observation().presence_mask(&self.env.layout())
    }
}

impl RolloutEnv for HvacTrainEnv {
    fn observation(&self) -> Vec<f64> {
        self.env.observation().to_vector(&self.env.layout())
    }

    fn reset(&mut self) -> Result<()> {
        let start = self.starts[self.start_rng.random_range(0..self.starts.len())];
        let len = self.env.config().episode.steps;
        self.env.reset(start, len)?;
        Ok(())
    }

    fn step(&mut self, action: Action) -> Result<Transition> {
        let out = self.env.step(action, &mut self.feedback)?;
        Ok(Transition { reward: out.costs.reward, cost: out.costs.total, done: out.done })
    }
}

/// Steps stored env-major: entry `e * steps + t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub steps: usize,
    /// Normalised observations as fed to the policy when acting.
    pub obs: Vec<Vec<f64>>,
    pub raw_obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Total cost of every episode that finished during this rollout.
    pub episode_costs: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// A fixed set of environment workers, each with its own action-sampling stream.
/// Worker `e` always fills slot `e` of the buffer, independent of scheduling.
#[derive(Debug)]
pub struct VecEnv<E> {
    pub envs: Vec<E>,
    rngs: Vec<RunRng>,
    running_cost: Vec<f64>,
}

impl<E: RolloutEnv> VecEnv<E> {
    pub fn new(envs: Vec<E>, seed: u64) -> Self {
        let n = envs.len();
        Self {
            envs,
            rngs: (0..n as u32).map(|e| substream(seed, Substream::ActionSampling, e)).collect(),
            running_cost: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    /// Sample `steps` actions per worker from the policy and compute GAE targets.
    pub fn collect(&mut self, net: &PolicyNet, steps: usize, gamma: f64, lambda: f64) -> Result<RolloutBuffer> {
        let n = self.envs.len();
        let total = n * steps;
        let mut buf = RolloutBuffer {
            num_envs: n,
            steps,
            obs: vec![Vec::new(); total],
            raw_obs: vec![Vec::new(); total],
            actions: vec![0; total],
            log_probs: vec![0.0; total],
            rewards: vec![0.0; total],
            values: vec![0.0; total],
            dones: vec![false; total],
            ..RolloutBuffer::default()
        };
        for t in 0..steps {
            let raw: Vec<Vec<f64>> = self.envs.iter().map(RolloutEnv::observation).collect();
            let normed: Vec<Vec<f64>> = raw.iter().map(|r| net.normalize(r)).collect();
            let eval = net.evaluate(&normed)?;
            for e in 0..n {
                let (lp0, lp1, v) = eval[e];
                let on = self.rngs[e].random::<f64>() < lp1.exp();
                let k = e * steps + t;
                let tr = self.envs[e].step(Action::from_bit(on))?;
                buf.actions[k] = usize::from(on);
                buf.log_probs[k] = if on { lp1 } else { lp0 };
                buf.values[k] = v;
                buf.rewards[k] = tr.reward;
                buf.dones[k] = tr.done;
                buf.obs[k] = normed[e].clone();
                buf.raw_obs[k] = raw[e].clone();
                self.running_cost[e] += tr.cost;
                if tr.done {
                    buf.episode_costs.push(self.running_cost[e]);
                    self.running_cost[e] = 0.0;
                    self.envs[e].reset()?;
                }
            }
        }
        let tail: Vec<Vec<f64>> = self.envs.iter().map(|env| net.normalize(&env.observation())).collect();
        let boot = net.evaluate(&tail)?;
        buf.advantages = vec![0.0; total];
        buf.returns = vec![0.0; total];
        for e in 0..n {
            let r = e * steps..(e + 1) * steps;
            let (adv, ret) = gae(&buf.rewards[r.clone()], &buf.values[r.clone()], &buf.dones[r.clone()], boot[e].2, gamma, lambda)?;
            buf.advantages[r.clone()].copy_from_slice(&adv);
            buf.returns[r].copy_from_slice(&ret);
        }
        Ok(buf)
    }
}
