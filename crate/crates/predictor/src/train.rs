use hvac_core::domain::{substream, Substream};
use hvac_nn::{clip_grad_norm, Adam, Graph, Tensor};
use rand::seq::SliceRandom;

use crate::error::{PredictorError, Result};
use crate::model::PredictorModel;
use crate::windows::Window;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss over the dataset before the first update.
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean binary cross-entropy from logits, `softplus(z) - y z`, averaged over all entries.
fn bce_from_logits(g: &mut Graph, logits: hvac_nn::Var, targets: Tensor) -> Result<hvac_nn::Var> {
    let y = g.constant(targets);
    let sp = g.softplus(logits);
    let yz = g.mul(y, logits)?;
    let d = g.sub(sp, yz)?;
    Ok(g.mean(d))
}

fn target_tensor(batch: &[&Window]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = batch.iter().map(|w| w.targets.clone()).collect();
    Ok(Tensor::from_rows(&rows)?)
}

fn batch_loss(model: &PredictorModel, g: &mut Graph, batch: &[&Window]) -> Result<hvac_nn::Var> {
    let inputs: Vec<_> = batch.iter().map(|w| (&w.past[..], &w.future[..])).collect();
    let z = model.batch_logits(g, model.store(), &inputs)?;
    bce_from_logits(g, z, target_tensor(batch)?)
}

/// Mean BCE over `windows` without updating the model.
pub fn mean_loss(model: &PredictorModel, windows: &[Window]) -> Result<f64> {
    if windows.is_empty() {
        return Err(PredictorError::EmptyDataset);
    }
    let mut total = 0.0;
    for chunk in windows.chunks(256) {
        let refs: Vec<&Window> = chunk.iter().collect();
        let mut g = Graph::new();
        let l = batch_loss(model, &mut g, &refs)?;
        total += g.value(l).item() * chunk.len() as f64;
    }
    Ok(total / windows.len() as f64)
}

/// Minibatch Adam on mean BCE. Shuffling and initialisation are seeded from the config.
pub fn train(model: &mut PredictorModel, windows: &[Window]) -> Result<TrainReport> {
    train_with(model, windows, |_, _| {})
}

/// [`train`] with a per-epoch callback `(epoch, loss)`.
pub fn train_with(
    model: &mut PredictorModel,
    windows: &[Window],
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    if windows.is_empty() {
        return Err(PredictorError::EmptyDataset);
    }
    let cfg = model.config().clone();
    let initial_loss = mean_loss(model, windows)?;
    let mut rng = substream(cfg.seed, Substream::PredictorShuffle, 0);
    let mut adam = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Window> = idx.iter().map(|&i| &windows[i]).collect();
            let mut g = Graph::new();
            let l = batch_loss(model, &mut g, &batch)?;
            let loss = g.value(l).item();
            if !loss.is_finite() {
                return Err(PredictorError::Diverged { epoch, batch: bi, loss });
            }
            let mut grads = g.backward(l)?.param_grads(model.store());
            clip_grad_norm(&mut grads, cfg.grad_clip);
            adam.step(model.store_mut(), &grads)?;
            sum += loss * batch.len() as f64;
        }
        let epoch_loss = sum / windows.len() as f64;
        on_epoch(epoch, epoch_loss);
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainReport { initial_loss, epoch_losses })
}
