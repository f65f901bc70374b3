use hvac_nn::{Graph, ParamStore, Tensor, Var};

use crate::config::PpoConfig;
use crate::error::{PpoError, Result};
use crate::net::PolicyNet;

/// One minibatch: normalised observations, behaviour log-probs, advantages and returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Nodes of the combined objective.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    /// `-L_clip + c1 L_vf - c2 H`; minimised by gradient descent.
    pub loss: Var,
    /// `L_clip = mean min(r A, clip(r, 1-eps, 1+eps) A)`.
    pub policy: Var,
    /// `mean (V - R)^2`.
    pub value: Var,
    /// Mean policy entropy.
    pub entropy: Var,
    /// Probability ratios `[m, 1]`.
    pub ratio: Var,
}

fn column(v: &[f64]) -> Tensor {
    Tensor::column(v)
}

/// Build the clipped-surrogate, value and entropy terms on `g`.
pub fn ppo_losses(
    g: &mut Graph,
    net: &PolicyNet,
    store: &ParamStore,
    batch: &Minibatch,
    cfg: &PpoConfig,
) -> Result<LossVars> {
    let m = batch.len();
    for (what, got) in [
        ("actions", batch.actions.len()),
        ("old_log_probs", batch.old_log_probs.len()),
        ("advantages", batch.advantages.len()),
        ("returns", batch.returns.len()),
    ] {
        if got != m {
            return Err(PpoError::LengthMismatch { what, expected: m, got });
        }
    }
    let obs = g.constant(Tensor::from_rows(&batch.obs)?);
    let lp_all = net.log_probs(g, store, obs)?;
    let lp = g.select(lp_all, &batch.actions)?;
    let old = g.constant(column(&batch.old_log_probs));
    let diff = g.sub(lp, old)?;
    let ratio = g.exp(diff);
    let adv = g.constant(column(&batch.advantages));
    let s1 = g.mul(ratio, adv)?;
    let clipped = g.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)?;
    let s2 = g.mul(clipped, adv)?;
    let surrogate = g.minimum(s1, s2)?;
    let policy = g.mean(surrogate);

    let v = net.values(g, store, obs)?;
    let ret = g.constant(column(&batch.returns));
    let err = g.sub(v, ret)?;
    let sq = g.square(err);
    let value = g.mean(sq);

    let p = g.exp(lp_all);
    let plogp = g.mul(p, lp_all)?;
    let neg_h = g.row_sum(plogp);
    let mean_neg_h = g.mean(neg_h);
    let entropy = g.neg(mean_neg_h);

    let a = g.neg(policy);
    let b = g.scale(value, cfg.c1);
    let c = g.scale(mean_neg_h, cfg.c2);
    let ab = g.add(a, b)?;
    let loss = g.add(ab, c)?;
    Ok(LossVars { loss, policy, value, entropy, ratio })
}
