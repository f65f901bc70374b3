use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

/// Adam with bias correction. Moment buffers are created lazily on the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Apply one update; `grads` is indexed like the store.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(NnError::InvalidArgument {
                op: "adam",
                message: format!("{} gradients for {} parameters", grads.len(), store.len()),
            });
        }
        if self.m.is_empty() {
            self.m = store.values().iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        }
        for (i, (p, g)) in store.values().iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || self.m[i].shape() != p.shape() {
                return Err(NnError::ShapeMismatch { op: "adam", left: p.shape(), right: g.shape() });
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in store.values_mut().iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                *w -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Rescale gradients so their global L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_descends_quadratic() {
        let mut store = ParamStore::new();
        store.add("theta", Tensor::scalar(1.0)).unwrap();
        let mut adam = Adam::new(0.1);
        let g = vec![Tensor::scalar(2.0)];
        adam.step(&mut store, &g).unwrap();
        let theta = store.values()[0].item();
        assert!(theta < 1.0);
        // first bias-corrected step moves by lr * sign(g)
        assert!((theta - 0.9).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = ParamStore::new();
        store.add("a", Tensor::row(&[0.3, -2.0])).unwrap();
        let before = store.clone();
        let mut adam = Adam::new(0.1);
        adam.step(&mut store, &[Tensor::zeros(1, 2)]).unwrap();
        assert_eq!(store, before);
    }

    #[test]
    fn clip_rescales() {
        let mut g = vec![Tensor::row(&[3.0, 4.0])];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
    }
}
