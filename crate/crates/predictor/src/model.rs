use hvac_core::domain::{substream, Substream};
use hvac_core::env::OccupancyForecaster;
use hvac_nn::{Checkpoint, Graph, Linear, LstmCell, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{PredictorError, Result};
use crate::windows::{future_features, past_features, FutureStep, PastStep, Window};

pub const CHECKPOINT_KIND: &str = "occupancy-predictor";
const PAST_FEATURES: usize = 3;
const FUTURE_FEATURES: usize = 2;
const INFERENCE_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// h^p: past steps before the current one.
    pub past_horizon: usize,
    /// h^O: future steps predicted.
    pub future_horizon: usize,
    /// Hidden size per direction.
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm cap per update.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            past_horizon: 96,
            future_horizon: 8,
            hidden: 32,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PredictorError::InvalidConfig(m.into()));
        if self.past_horizon == 0 {
            return bad("past_horizon must be at least 1");
        }
        if self.future_horizon == 0 {
            return bad("future_horizon must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive");
        }
        Ok(())
    }
}

/// Parameter handles of the two-layer bidirectional network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorNet {
    pub enc_fwd: LstmCell,
    pub enc_bwd: LstmCell,
    pub dec_fwd: LstmCell,
    pub dec_bwd: LstmCell,
    pub head: Linear,
}

impl PredictorNet {
    fn build<R: rand::Rng + ?Sized>(store: &mut ParamStore, hidden: usize, rng: &mut R) -> Result<Self> {
        let enc_fwd = LstmCell::new(store, "enc.fwd", PAST_FEATURES, hidden, rng)?;
        let enc_bwd = LstmCell::new(store, "enc.bwd", PAST_FEATURES, hidden, rng)?;
        let dec_in = 2 * hidden + FUTURE_FEATURES;
        let dec_fwd = LstmCell::new(store, "dec.fwd", dec_in, hidden, rng)?;
        let dec_bwd = LstmCell::new(store, "dec.bwd", dec_in, hidden, rng)?;
        let head = Linear::new(store, "head", 2 * hidden, 1, rng)?;
        Ok(Self { enc_fwd, enc_bwd, dec_fwd, dec_bwd, head })
    }

    /// Context `[h_fwd at t; h_bwd at t-h]` from per-step inputs `[m, 3]`, oldest first.
    pub fn context(&self, g: &mut Graph, store: &ParamStore, past: &[Var]) -> Result<Var> {
        let m = g.shape(past[0])[0];
        let (mut hf, mut cf) = self.enc_fwd.zero_state(g, m);
        for &x in past {
            (hf, cf) = self.enc_fwd.forward(g, store, x, hf, cf)?;
        }
        let (mut hb, mut cb) = self.enc_bwd.zero_state(g, m);
        for &x in past.iter().rev() {
            (hb, cb) = self.enc_bwd.forward(g, store, x, hb, cb)?;
        }
        Ok(g.concat_cols(&[hf, hb])?)
    }

    /// Logits `[m, h^O]` for inputs `past[k]: [m, 3]` and `future[j]: [m, 2]`.
    pub fn logits(&self, g: &mut Graph, store: &ParamStore, past: &[Var], future: &[Var]) -> Result<Var> {
        let ctx = self.context(g, store, past)?;
        let m = g.shape(ctx)[0];
        let z: Vec<Var> = future
            .iter()
            .map(|&tau| g.concat_cols(&[ctx, tau]))
            .collect::<hvac_nn::Result<_>>()?;
        let mut fwd = Vec::with_capacity(z.len());
        let (mut h, mut c) = self.dec_fwd.zero_state(g, m);
        for &x in &z {
            (h, c) = self.dec_fwd.forward(g, store, x, h, c)?;
            fwd.push(h);
        }
        let mut bwd = vec![fwd[0]; z.len()];
        let (mut h, mut c) = self.dec_bwd.zero_state(g, m);
        for (j, &x) in z.iter().enumerate().rev() {
            (h, c) = self.dec_bwd.forward(g, store, x, h, c)?;
            bwd[j] = h;
        }
        let cols: Vec<Var> = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| {
                let fb = g.concat_cols(&[f, b])?;
                self.head.forward(g, store, fb)
            })
            .collect::<hvac_nn::Result<_>>()?;
        Ok(g.concat_cols(&cols)?)
    }
}

/// Stack one feature position across samples: `rows[s][k]` becomes row `s` of tensor `k`.
pub(crate) fn step_tensors<const N: usize>(rows: &[&[[f64; N]]]) -> Result<Vec<Tensor>> {
    let len = rows.first().map_or(0, |r| r.len());
    (0..len)
        .map(|k| {
            let data = rows.iter().flat_map(|r| r[k]).collect();
            Ok(Tensor::new(rows.len(), N, data)?)
        })
        .collect()
}

/// Trained (or freshly initialised) forecaster. Immutable snapshots are safe to share.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    config: PredictorConfig,
    store: ParamStore,
    net: PredictorNet,
}

fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
    // keep outputs strictly inside (0, 1)
    p.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

impl PredictorModel {
    pub fn new(config: PredictorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(config.seed, Substream::PredictorInit, 0);
        let mut store = ParamStore::new();
        let net = PredictorNet::build(&mut store, config.hidden, &mut rng)?;
        Ok(Self { config, store, net })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn net(&self) -> &PredictorNet {
        &self.net
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn zero_output_layer(&mut self) {
        self.net.head.zero(&mut self.store);
    }

    fn check_shapes(&self, past: &[PastStep], future: &[FutureStep]) -> Result<()> {
        if past.len() != self.config.past_horizon + 1 {
            return Err(PredictorError::Shape {
                what: "past window length",
                expected: self.config.past_horizon + 1,
                got: past.len(),
            });
        }
        if future.len() != self.config.future_horizon {
            return Err(PredictorError::Shape {
                what: "future feature length",
                expected: self.config.future_horizon,
                got: future.len(),
            });
        }
        Ok(())
    }

    fn inputs(&self, g: &mut Graph, batch: &[(&[PastStep], &[FutureStep])]) -> Result<(Vec<Var>, Vec<Var>)> {
        for (p, f) in batch {
            self.check_shapes(p, f)?;
        }
        let past: Vec<&[PastStep]> = batch.iter().map(|b| b.0).collect();
        let future: Vec<&[FutureStep]> = batch.iter().map(|b| b.1).collect();
        let pv = step_tensors(&past)?.into_iter().map(|t| g.constant(t)).collect();
        let fv = step_tensors(&future)?.into_iter().map(|t| g.constant(t)).collect();
        Ok((pv, fv))
    }

    /// Logits for a batch, built on `g` against `store` (which may differ from the model's own).
    pub fn batch_logits(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        batch: &[(&[PastStep], &[FutureStep])],
    ) -> Result<Var> {
        let (pv, fv) = self.inputs(g, batch)?;
        self.net.logits(g, store, &pv, &fv)
    }

    /// Probabilities for each sample of `batch`.
    pub fn predict_batch(&self, batch: &[(&[PastStep], &[FutureStep])]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(INFERENCE_BATCH) {
            let mut g = Graph::new();
            let z = self.batch_logits(&mut g, &self.store, chunk)?;
            let t = g.value(z);
            out.extend((0..t.rows()).map(|r| t.row_slice(r).iter().map(|&z| sigmoid(z)).collect()));
        }
        Ok(out)
    }

    pub fn predict(&self, past: &[PastStep], future: &[FutureStep]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(&[(past, future)])?.remove(0))
    }

    pub fn predict_windows(&self, windows: &[Window]) -> Result<Vec<Vec<f64>>> {
        let batch: Vec<_> = windows.iter().map(|w| (&w.past[..], &w.future[..])).collect();
        self.predict_batch(&batch)
    }

    /// Encoder context vector for one past window.
    pub fn context(&self, past: &[PastStep]) -> Result<Vec<f64>> {
        if past.len() != self.config.past_horizon + 1 {
            return Err(PredictorError::Shape {
                what: "past window length",
                expected: self.config.past_horizon + 1,
                got: past.len(),
            });
        }
        let mut g = Graph::new();
        let pv: Vec<Var> = step_tensors(&[past])?.into_iter().map(|t| g.constant(t)).collect();
        let ctx = self.net.context(&mut g, &self.store, &pv)?;
        Ok(g.value(ctx).data().to_vec())
    }

    /// Fraction of (sample, step) pairs where `p > threshold` matches the target.
    pub fn accuracy(&self, windows: &[Window], threshold: f64) -> Result<f64> {
        if windows.is_empty() {
            return Err(PredictorError::EmptyDataset);
        }
        let preds = self.predict_windows(windows)?;
        let targets: Vec<&[f64]> = windows.iter().map(|w| &w.targets[..]).collect();
        Ok(accuracy(&preds, &targets, threshold))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        Checkpoint::from_store(&self.store)
            .with_metadata("kind", CHECKPOINT_KIND)
            .with_metadata("config", config)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let kind = ck.meta("kind")?;
        if kind != CHECKPOINT_KIND {
            return Err(PredictorError::Checkpoint(format!("kind {kind:?}")));
        }
        let config: PredictorConfig = serde_json::from_str(ck.meta("config")?)
            .map_err(|e| PredictorError::Checkpoint(format!("config: {e}")))?;
        let mut model = Self::new(config)?;
        ck.load_into(&mut model.store)?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Mean over all pairs of `1{(p > threshold) == (target > 0.5)}`.
pub fn accuracy(preds: &[Vec<f64>], targets: &[&[f64]], threshold: f64) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (p, t) in preds.iter().zip(targets) {
        for (&p, &y) in p.iter().zip(t.iter()) {
            hits += usize::from((p > threshold) == (y > 0.5));
            total += 1;
        }
    }
    if total == 0 { f64::NAN } else { hits as f64 / total as f64 }
}

impl OccupancyForecaster for PredictorModel {
    fn past_horizon(&self) -> usize {
        self.config.past_horizon
    }

    fn future_horizon(&self) -> usize {
        self.config.future_horizon
    }

    fn forecast(&self, window: &[bool], clock_now: usize, cycle_steps: usize) -> hvac_core::Result<Vec<f64>> {
        Ok(self.forecast_many(&[window.to_vec()], &[clock_now], cycle_steps)?.remove(0))
    }

    fn forecast_many(
        &self,
        windows: &[Vec<bool>],
        clocks: &[usize],
        cycle_steps: usize,
    ) -> hvac_core::Result<Vec<Vec<f64>>> {
        let feats = windows
            .iter()
            .zip(clocks)
            .map(|(w, &c)| {
                Ok((
                    past_features(w, c, cycle_steps)?,
                    future_features(c, self.config.future_horizon, cycle_steps)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<_> = feats.iter().map(|(p, f)| (&p[..], &f[..])).collect();
        Ok(self.predict_batch(&batch)?)
    }
}
