use hvac_core::domain::SimConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PpoError, Result};

/// How observations are scaled before entering the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    /// Running mean and variance collected during training, frozen into the checkpoint.
    Running,
    /// Raw observations.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    /// Value-loss coefficient.
    pub c1: f64,
    /// Entropy-bonus coefficient.
    pub c2: f64,
    pub num_envs: usize,
    /// Steps per environment per rollout; a rollout holds `num_envs * steps_per_env` steps.
    pub steps_per_env: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub hidden: Vec<usize>,
    pub max_grad_norm: f64,
    pub updates: usize,
    /// Validate (and possibly keep a new best) every this many updates; 0 disables.
    pub eval_every: usize,
    pub normalization: NormalizationMode,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            c1: 0.5,
            c2: 0.01,
            num_envs: 8,
            steps_per_env: 256,
            epochs: 4,
            minibatch_size: 256,
            hidden: vec![64, 64],
            max_grad_norm: 0.5,
            updates: 200,
            eval_every: 10,
            normalization: NormalizationMode::Running,
            seed: 0,
        }
    }
}

impl PpoConfig {
    /// Hex SHA-256 over the training config JSON and the simulator config TOML.
    pub fn run_hash(&self, sim: &SimConfig) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update([0u8]);
        h.update(sim.to_toml_string().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PpoError::InvalidConfig(m));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad(format!("clip_eps must lie in (0, 1), got {}", self.clip_eps));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("gamma and lambda must lie in [0, 1], got {} and {}", self.gamma, self.lambda));
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate and max_grad_norm must be positive".into());
        }
        if self.num_envs == 0 || self.steps_per_env == 0 || self.epochs == 0 || self.minibatch_size == 0 {
            return bad("num_envs, steps_per_env, epochs and minibatch_size must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden sizes {:?}", self.hidden));
        }
        Ok(())
    }
}
