use hvac_core::domain::{substream, Action, Substream};
use hvac_nn::{Checkpoint, Graph, Mlp, ParamStore, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PpoError, Result};
use crate::normalize::ObsNormalizer;

pub const CHECKPOINT_KIND: &str = "ppo-policy";

/// Separate actor (2 logits) and critic (scalar value) trunks over the normalised
/// observation, plus the frozen normaliser statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub store: ParamStore,
    pub actor: Mlp,
    pub critic: Mlp,
    pub normalizer: ObsNormalizer,
    pub mask: Vec<bool>,
    pub hidden: Vec<usize>,
}

/// Serialized with the checkpoint so a policy is evaluable on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetMeta {
    obs_dim: usize,
    hidden: Vec<usize>,
    mask: Vec<bool>,
    normalizer: ObsNormalizer,
}

impl PolicyNet {
    /// `mask` flags observation entries that are present in this scenario.
    pub fn new<R: Rng + ?Sized>(
        mask: Vec<bool>,
        hidden: &[usize],
        normalize: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let dim = mask.len();
        let mut store = ParamStore::new();
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        let actor = Mlp::new(&mut store, "actor", &[sizes.clone(), vec![2]].concat(), rng)?;
        let critic = Mlp::new(&mut store, "critic", &[sizes, vec![1]].concat(), rng)?;
        // small initial logits keep the starting policy close to uniform
        if let Some(out) = actor.output() {
            let w = store.get_mut(out.weight);
            w.data_mut().iter_mut().for_each(|x| *x *= 0.01);
            store.get_mut(out.bias).data_mut().fill(0.0);
        }
        Ok(Self {
            store,
            actor,
            critic,
            normalizer: ObsNormalizer::new(dim, normalize),
            mask,
            hidden: hidden.to_vec(),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.mask.len()
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        self.normalizer.normalize(raw, &self.mask)
    }

    /// Row-wise log-probabilities `[m, 2]` of the two actions.
    pub fn log_probs(&self, g: &mut Graph, store: &ParamStore, obs: Var) -> Result<Var> {
        let logits = self.actor.forward(g, store, obs)?;
        Ok(g.log_softmax(logits))
    }

    /// Values `[m, 1]`.
    pub fn values(&self, g: &mut Graph, store: &ParamStore, obs: Var) -> Result<Var> {
        Ok(self.critic.forward(g, store, obs)?)
    }

    /// Forward pass over already-normalised rows: `(log p(a=0), log p(a=1), value)` per row.
    pub fn evaluate(&self, rows: &[Vec<f64>]) -> Result<Vec<(f64, f64, f64)>> {
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_rows(rows)?);
        let lp = self.log_probs(&mut g, &self.store, x)?;
        let v = self.values(&mut g, &self.store, x)?;
        let (lp, v) = (g.value(lp), g.value(v));
        Ok((0..rows.len()).map(|r| (lp.get(r, 0), lp.get(r, 1), v.get(r, 0))).collect())
    }

    /// Probability of switching the HVAC on for a raw observation.
    pub fn prob_on(&self, raw: &[f64]) -> Result<f64> {
        let (_, lp1, _) = self.evaluate(&[self.normalize(raw)])?[0];
        Ok(lp1.exp())
    }

    /// Most likely action; exact ties choose off.
    pub fn greedy(&self, raw: &[f64]) -> Result<Action> {
        let (lp0, lp1, _) = self.evaluate(&[self.normalize(raw)])?[0];
        Ok(Action::from_bit(lp1 > lp0))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = NetMeta {
            obs_dim: self.obs_dim(),
            hidden: self.hidden.clone(),
            mask: self.mask.clone(),
            normalizer: self.normalizer.clone(),
        };
        Checkpoint::from_store(&self.store)
            .with_metadata("kind", CHECKPOINT_KIND)
            .with_metadata("net", serde_json::to_string(&meta).expect("net metadata serializes"))
    }

    /// Checkpoint tagged with the scenario and the hash of the configs that produced it.
    pub fn to_run_checkpoint(&self, cfg: &crate::PpoConfig, sim: &hvac_core::domain::SimConfig) -> Checkpoint {
        self.to_checkpoint()
            .with_metadata("scenario", sim.scenario.id.to_string())
            .with_metadata("config_hash", cfg.run_hash(sim))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let kind = ck.meta("kind")?;
        if kind != CHECKPOINT_KIND {
            return Err(PpoError::Checkpoint(format!("kind {kind:?}")));
        }
        let meta: NetMeta = serde_json::from_str(ck.meta("net")?)
            .map_err(|e| PpoError::Checkpoint(format!("net metadata: {e}")))?;
        if meta.mask.len() != meta.obs_dim || meta.normalizer.dim() != meta.obs_dim {
            return Err(PpoError::Checkpoint("inconsistent observation width".into()));
        }
        // architecture only; values are overwritten below
        let mut rng = substream(0, Substream::PolicyInit, 0);
        let mut net = Self::new(meta.mask, &meta.hidden, meta.normalizer.enabled, &mut rng)?;
        net.normalizer = meta.normalizer;
        ck.load_into(&mut net.store)?;
        Ok(net)
    }
}
