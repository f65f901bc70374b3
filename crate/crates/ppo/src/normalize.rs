use serde::{Deserialize, Serialize};

const VAR_EPS: f64 = 1e-8;
const CLIP: f64 = 10.0;

/// Per-feature running mean and variance. Features flagged absent are neither counted
/// nor passed through: they always normalise to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub enabled: bool,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub count: Vec<f64>,
}

impl ObsNormalizer {
    pub fn new(dim: usize, enabled: bool) -> Self {
        Self { enabled, mean: vec![0.0; dim], m2: vec![0.0; dim], count: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count[i] > 1.0 { self.m2[i] / self.count[i] } else { 1.0 }
    }

    /// Merge a batch of rows (Chan et al. parallel update).
    pub fn update(&mut self, rows: &[Vec<f64>], mask: &[bool]) {
        if !self.enabled || rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        for i in 0..self.dim() {
            if !mask[i] {
                continue;
            }
            let mean_b = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            let m2_b = rows.iter().map(|r| (r[i] - mean_b).powi(2)).sum::<f64>();
            let na = self.count[i];
            let total = na + n;
            let delta = mean_b - self.mean[i];
            self.mean[i] += delta * n / total;
            self.m2[i] += m2_b + delta * delta * na * n / total;
            self.count[i] = total;
        }
    }

    pub fn normalize(&self, x: &[f64], mask: &[bool]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                if !mask[i] {
                    0.0
                } else if !self.enabled {
                    v
                } else {
                    ((v - self.mean[i]) / (self.variance(i) + VAR_EPS).sqrt()).clamp(-CLIP, CLIP)
                }
            })
            .collect()
    }
}
