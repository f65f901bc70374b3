use std::sync::Arc;

use hvac_core::domain::{Action, RunRng};
use hvac_core::env::{DecisionContext, Policy};
use rand::Rng;

use crate::net::PolicyNet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Most likely action.
    Greedy,
    /// Sample from the action distribution using the episode RNG.
    Sample,
}

/// A trained network acting from the (masked) observation only.
#[derive(Debug, Clone)]
pub struct RlPolicy {
    net: Arc<PolicyNet>,
    mode: ActMode,
}

impl RlPolicy {
    pub fn new(net: Arc<PolicyNet>, mode: ActMode) -> Self {
        Self { net, mode }
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }
}

impl Policy for RlPolicy {
    fn name(&self) -> &str {
        "rl"
    }

    fn act(&mut self, ctx: &DecisionContext<'_>, rng: &mut RunRng) -> hvac_core::Result<Action> {
        let raw = ctx.observation.to_vector(&ctx.layout);
        if raw.len() != self.net.obs_dim() {
            return Err(hvac_core::Error::InvalidConfig(format!(
                "policy expects {} observation entries, scenario provides {}",
                self.net.obs_dim(),
                raw.len()
            )));
        }
        match self.mode {
            ActMode::Greedy => Ok(self.net.greedy(&raw)?),
            ActMode::Sample => {
                let p = self.net.prob_on(&raw)?;
                Ok(Action::from_bit(rng.random::<f64>() < p))
            }
        }
    }
}
