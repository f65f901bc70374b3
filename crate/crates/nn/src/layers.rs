use rand::Rng;

use crate::error::{NnError, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Affine map `x W + b` with `W: [in, out]`, `b: [1, out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    /// Uniform(-k, k) init with k = 1/sqrt(in).
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let k = 1.0 / (input as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), Tensor::uniform(input, output, k, rng))?;
        let bias = store.add(format!("{name}.bias"), Tensor::uniform(1, output, k, rng))?;
        Ok(Self { weight, bias, input, output })
    }

    pub fn zero(&self, store: &mut ParamStore) {
        store.get_mut(self.weight).data_mut().fill(0.0);
        store.get_mut(self.bias).data_mut().fill(0.0);
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, w)?;
        g.add(xw, b)
    }
}

/// Stack of affine layers with tanh between them and a linear output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `sizes` lists every width including input and output.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        sizes: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::InvalidArgument {
                op: "mlp",
                message: format!("layer sizes {sizes:?}"),
            });
        }
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, store, h)?;
            if i + 1 < self.layers.len() {
                h = g.tanh(h);
            }
        }
        Ok(h)
    }

    pub fn output(&self) -> Option<&Linear> {
        self.layers.last()
    }
}

/// LSTM cell with fused gate weights `W: [D + H, 4H]` and bias `[1, 4H]`.
/// Column blocks are input, forget, output, candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    /// Uniform(-k, k) with k = 1/sqrt(D + H); forget-gate bias starts at +1.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(NnError::InvalidArgument {
                op: "lstm",
                message: format!("input {input}, hidden {hidden}"),
            });
        }
        let k = 1.0 / ((input + hidden) as f64).sqrt();
        let w = Tensor::uniform(input + hidden, 4 * hidden, k, rng);
        let mut b = Tensor::uniform(1, 4 * hidden, k, rng);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        let weight = store.add(format!("{name}.weight"), w)?;
        let bias = store.add(format!("{name}.bias"), b)?;
        Ok(Self { weight, bias, input, hidden })
    }

    /// One step over a batch: `x: [m, D]`, `h, c: [m, H]`, returns `(h', c')`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hs = self.hidden;
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xh = g.concat_cols(&[x, h])?;
        let z = g.matmul(xh, w)?;
        let z = g.add(z, b)?;
        let zi = g.slice_cols(z, 0, hs)?;
        let zf = g.slice_cols(z, hs, 2 * hs)?;
        let zo = g.slice_cols(z, 2 * hs, 3 * hs)?;
        let zg = g.slice_cols(z, 3 * hs, 4 * hs)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let o = g.sigmoid(zo);
        let cand = g.tanh(zg);
        let fc = g.mul(f, c)?;
        let ig = g.mul(i, cand)?;
        let c2 = g.add(fc, ig)?;
        let tc = g.tanh(c2);
        let h2 = g.mul(o, tc)?;
        Ok((h2, c2))
    }

    /// Zero state for a batch of `rows`.
    pub fn zero_state(&self, g: &mut Graph, rows: usize) -> (Var, Var) {
        let h = g.constant(Tensor::zeros(rows, self.hidden));
        let c = g.constant(Tensor::zeros(rows, self.hidden));
        (h, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_lstm_outputs_zero_hidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "l", 3, 4, &mut rng).unwrap();
        store.get_mut(cell.weight).data_mut().fill(0.0);
        store.get_mut(cell.bias).data_mut().fill(0.0);
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&[0.5, -1.0, 2.0]));
        let (h, c) = cell.zero_state(&mut g, 1);
        let (h2, _) = cell.forward(&mut g, &store, x, h, c).unwrap();
        assert_eq!(g.value(h2), &Tensor::zeros(1, 4));
    }

    #[test]
    fn saturated_forget_gate_carries_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "l", 2, 3, &mut rng).unwrap();
        store.get_mut(cell.weight).data_mut().fill(0.0);
        let b = store.get_mut(cell.bias).data_mut();
        b[..3].fill(-1e3);
        b[3..6].fill(1e3);
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&[1.0, -1.0]));
        let h = g.constant(Tensor::row(&[0.1, 0.2, 0.3]));
        let c = g.constant(Tensor::row(&[0.7, -0.4, 1.5]));
        let (_, c2) = cell.forward(&mut g, &store, x, h, c).unwrap();
        assert_eq!(g.value(c2), g.value(c));
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "l", 2, 5, &mut rng).unwrap();
        assert!(store.get(cell.bias).data()[5..10].iter().all(|&b| b == 1.0));
        let k = 1.0 / 7f64.sqrt();
        assert!(store.get(cell.weight).data().iter().all(|w| w.abs() <= k));
    }

    #[test]
    fn mlp_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[5, 7, 3], &mut rng).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(4, 5));
        let y = mlp.forward(&mut g, &store, x).unwrap();
        assert_eq!(g.shape(y), [4, 3]);
        assert!(Mlp::new(&mut store, "bad", &[5], &mut rng).is_err());
    }
}
