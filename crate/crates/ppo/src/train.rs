use hvac_core::domain::{substream, RunRng, Substream};
use hvac_nn::{clip_grad_norm, Adam, Graph, Tensor};
use rand::seq::SliceRandom;

use crate::config::PpoConfig;
use crate::error::{PpoError, Result};
use crate::gae::normalize_advantages;
use crate::loss::{ppo_losses, Minibatch};
use crate::net::PolicyNet;
use crate::rollout::{RolloutBuffer, RolloutEnv, VecEnv};

/// Diagnostics of one update (averaged over its minibatches).
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub update: usize,
    /// Mean total cost of episodes completed during the rollout.
    pub mean_episode_cost: Option<f64>,
    pub policy_objective: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1-eps, 1+eps]` during the epochs.
    pub clip_fraction: f64,
    pub validation_cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Policy with the lowest validation cost (the final one when validation is off).
    pub best: PolicyNet,
    pub last: PolicyNet,
    pub best_validation_cost: Option<f64>,
    pub curve: Vec<UpdateStats>,
}

/// Minibatch view of `idx` with per-minibatch advantage normalisation.
pub fn minibatch(buf: &RolloutBuffer, idx: &[usize]) -> Minibatch {
    let mut advantages: Vec<f64> = idx.iter().map(|&i| buf.advantages[i]).collect();
    normalize_advantages(&mut advantages);
    Minibatch {
        obs: idx.iter().map(|&i| buf.obs[i].clone()).collect(),
        actions: idx.iter().map(|&i| buf.actions[i]).collect(),
        old_log_probs: idx.iter().map(|&i| buf.log_probs[i]).collect(),
        advantages,
        returns: idx.iter().map(|&i| buf.returns[i]).collect(),
    }
}

/// Current probability ratios `pi(a|s) / pi_old(a|s)` over the whole buffer.
pub fn ratios(net: &PolicyNet, buf: &RolloutBuffer) -> Result<Vec<f64>> {
    let eval = net.evaluate(&buf.obs)?;
    Ok(eval
        .iter()
        .zip(&buf.actions)
        .zip(&buf.log_probs)
        .map(|((&(lp0, lp1, _), &a), &old)| ((if a == 1 { lp1 } else { lp0 }) - old).exp())
        .collect())
}

/// Sums of (policy, value, entropy, clipped count, samples) over minibatches.
type EpochSums = (f64, f64, f64, usize, usize);

/// Run `cfg.epochs` passes of minibatch Adam over `buf`.
pub fn ppo_update(
    net: &mut PolicyNet,
    adam: &mut Adam,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut RunRng,
    update: usize,
) -> Result<EpochSums> {
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut sums: EpochSums = (0.0, 0.0, 0.0, 0, 0);
    let mut batches = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(cfg.minibatch_size) {
            let mb = minibatch(buf, idx);
            let finite = mb.advantages.iter().chain(&mb.returns).chain(&mb.old_log_probs).all(|x| x.is_finite());
            if !finite {
                return Err(PpoError::Diverged { update, last_good: Box::new(net.clone()) });
            }
            let mut g = Graph::new();
            let lv = ppo_losses(&mut g, net, &net.store, &mb, cfg)?;
            let loss = g.value(lv.loss).item();
            if !loss.is_finite() {
                return Err(PpoError::Diverged { update, last_good: Box::new(net.clone()) });
            }
            let mut grads = g.backward(lv.loss)?.param_grads(&net.store);
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            adam.step(&mut net.store, &grads)?;
            let r: &Tensor = g.value(lv.ratio);
            sums.0 += g.value(lv.policy).item();
            sums.1 += g.value(lv.value).item();
            sums.2 += g.value(lv.entropy).item();
            sums.3 += r.data().iter().filter(|&&x| (x - 1.0).abs() > cfg.clip_eps).count();
            sums.4 += idx.len();
            batches += 1;
        }
    }
    let b = batches.max(1) as f64;
    Ok((sums.0 / b, sums.1 / b, sums.2 / b, sums.3, sums.4))
}

/// Alternate rollouts and updates; keep the best policy by `validate` (lower is better).
/// On a non-finite loss the error carries the last policy that produced finite losses.
pub fn train<E: RolloutEnv>(
    cfg: &PpoConfig,
    mut net: PolicyNet,
    workers: &mut VecEnv<E>,
    validate: &mut dyn FnMut(&PolicyNet) -> Result<f64>,
    on_update: &mut dyn FnMut(&UpdateStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut adam = Adam::new(cfg.learning_rate);
    let mut rng = substream(cfg.seed, Substream::Minibatch, 0);
    let mut best: Option<(f64, PolicyNet)> = None;
    let mut curve = Vec::with_capacity(cfg.updates);
    for update in 0..cfg.updates {
        let buf = workers.collect(&net, cfg.steps_per_env, cfg.gamma, cfg.lambda)?;
        let before = net.clone();
        let (policy_objective, value_loss, entropy, clipped, seen) =
            match ppo_update(&mut net, &mut adam, &buf, cfg, &mut rng, update) {
                Err(PpoError::Diverged { update, .. }) => {
                    let last_good = best.map(|b| b.1).unwrap_or(before);
                    return Err(PpoError::Diverged { update, last_good: Box::new(last_good) });
                }
                other => other?,
            };
        let mask = net.mask.clone();
        net.normalizer.update(&buf.raw_obs, &mask);
        let is_last = update + 1 == cfg.updates;
        let validation_cost = if cfg.eval_every > 0 && ((update + 1) % cfg.eval_every == 0 || is_last) {
            let c = validate(&net)?;
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, net.clone()));
            }
            Some(c)
        } else {
            None
        };
        let stats = UpdateStats {
            update,
            mean_episode_cost: (!buf.episode_costs.is_empty())
                .then(|| buf.episode_costs.iter().sum::<f64>() / buf.episode_costs.len() as f64),
            policy_objective,
            value_loss,
            entropy,
            clip_fraction: clipped as f64 / seen.max(1) as f64,
            validation_cost,
        };
        on_update(&stats);
        curve.push(stats);
    }
    let (best_validation_cost, best_net) = match best {
        Some((c, n)) => (Some(c), n),
        None => (None, net.clone()),
    };
    Ok(TrainOutcome { best: best_net, last: net, best_validation_cost, curve })
}
