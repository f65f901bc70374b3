//! Dynamic reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the tape is already topologically
//! sorted and backward is a single reverse sweep. A graph is rebuilt per forward pass.

use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Exp(Var),
    Softplus(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Mean(Var),
    Sum(Var),
    RowSum(Var),
    Clip(Var, f64, f64),
    Minimum(Var, Var),
    LogSoftmax(Var),
    Select(Var, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Single-owner computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
}

/// Output shape of a broadcasting binary op: each dim equal or 1.
fn broadcast_shape(op: &'static str, a: [usize; 2], b: [usize; 2]) -> Result<[usize; 2]> {
    let dim = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    match (dim(a[0], b[0]), dim(a[1], b[1])) {
        (Some(r), Some(c)) => Ok([r, c]),
        _ => Err(NnError::ShapeMismatch { op, left: a, right: b }),
    }
}

#[inline]
fn bget(t: &Tensor, r: usize, c: usize) -> f64 {
    let rr = if t.rows() == 1 { 0 } else { r };
    let cc = if t.cols() == 1 { 0 } else { c };
    t.get(rr, cc)
}

fn broadcast_zip(a: &Tensor, b: &Tensor, shape: [usize; 2], f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.shape() == shape && b.shape() == shape {
        return a.zip_map(b, f);
    }
    let mut data = Vec::with_capacity(shape[0] * shape[1]);
    for r in 0..shape[0] {
        for c in 0..shape[1] {
            data.push(f(bget(a, r, c), bget(b, r, c)));
        }
    }
    Tensor::new(shape[0], shape[1], data).expect("broadcast shape")
}

/// Sum `g` down to `shape` along broadcast dimensions.
fn reduce_to(g: &Tensor, shape: [usize; 2]) -> Tensor {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Tensor::zeros(shape[0], shape[1]);
    let cols = shape[1];
    let d = out.data_mut();
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            let rr = if shape[0] == 1 { 0 } else { r };
            let cc = if shape[1] == 1 { 0 } else { c };
            d[rr * cols + cc] += g.get(r, c);
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.all_finite(), "non-finite value produced by {op:?}");
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// Differentiable leaf (gradients are reported for it).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Leaf for a stored parameter; repeated calls with the same id return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(Some(v)) = self.params.get(id.0) {
            return *v;
        }
        let v = self.push(store.get(id).clone(), Op::Leaf, true);
        if self.params.len() <= id.0 {
            self.params.resize(id.0 + 1, None);
        }
        self.params[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let shape = broadcast_shape(name, self.shape(a), self.shape(b))?;
        Ok(broadcast_zip(self.value(a), self.value(b), shape, f))
    }

    /// Elementwise sum; either side may broadcast along a unit dimension.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| k * x);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, k), rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| x + k);
        let rg = self.rg(a);
        self.push(v, Op::AddScalar(a), rg)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.value(a).map(f);
        let rg = self.rg(a);
        self.push(v, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// Natural log; inputs must be positive.
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    /// ln(1 + e^x), computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Clamp to `[lo, hi]`; gradient is zero outside the open interval.
    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if lo > hi {
            return Err(NnError::InvalidArgument {
                op: "clip",
                message: format!("lower bound {lo} exceeds upper bound {hi}"),
            });
        }
        Ok(self.unary(a, |x| x.clamp(lo, hi), Op::Clip(a, lo, hi)))
    }

    /// Elementwise minimum of equal-shape inputs; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::ShapeMismatch {
                op: "minimum",
                left: self.shape(a),
                right: self.shape(b),
            });
        }
        let v = self.value(a).zip_map(self.value(b), f64::min);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Minimum(a, b), rg))
    }

    /// Join along columns; all parts need the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(NnError::InvalidArgument {
                op: "concat",
                message: "no inputs".into(),
            });
        };
        let rows = self.shape(first)[0];
        for &p in parts {
            if self.shape(p)[0] != rows {
                return Err(NnError::ShapeMismatch {
                    op: "concat",
                    left: self.shape(first),
                    right: self.shape(p),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::new(rows, cols, data)?, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let [rows, cols] = self.shape(a);
        if start >= end || end > cols {
            return Err(NnError::InvalidArgument {
                op: "slice",
                message: format!("range {start}..{end} on shape [{rows}, {cols}]"),
            });
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&src.row_slice(r)[start..end]);
        }
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(rows, end - start, data)?, Op::SliceCols(a, start), rg))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let v = Tensor::scalar(t.sum() / t.len() as f64);
        let rg = self.rg(a);
        self.push(v, Op::Mean(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(v, Op::Sum(a), rg)
    }

    /// Per-row sum, `[m, n] -> [m, 1]`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = (0..t.rows()).map(|r| t.row_slice(r).iter().sum()).collect();
        let v = Tensor::new(t.rows(), 1, data).expect("row sum shape");
        let rg = self.rg(a);
        self.push(v, Op::RowSum(a), rg)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut data = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            let row = t.row_slice(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            data.extend(row.iter().map(|x| x - lse));
        }
        let v = Tensor::new(t.rows(), t.cols(), data).expect("log softmax shape");
        let rg = self.rg(a);
        self.push(v, Op::LogSoftmax(a), rg)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let l = self.log_softmax(a);
        self.exp(l)
    }

    /// Pick column `idx[r]` of each row, `[m, n] -> [m, 1]`.
    pub fn select(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let [rows, cols] = self.shape(a);
        if idx.len() != rows || idx.iter().any(|&i| i >= cols) {
            return Err(NnError::InvalidArgument {
                op: "select",
                message: format!("{} indices for shape [{rows}, {cols}]", idx.len()),
            });
        }
        let t = self.value(a);
        let data = idx.iter().enumerate().map(|(r, &c)| t.get(r, c)).collect();
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(rows, 1, data)?, Op::Select(a, idx.to_vec()), rg))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(NnError::NonScalarLoss(shape));
        }
        let l = self.value(loss).item();
        if !l.is_finite() {
            return Err(NnError::NonFiniteLoss(l));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads)?;
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, g.matmul_t(self.value(*b))?);
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, self.value(*a).t_matmul(g)?);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, reduce_to(g, self.shape(*a)));
                self.accumulate(grads, *b, reduce_to(g, self.shape(*b)));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, reduce_to(g, self.shape(*a)));
                self.accumulate(grads, *b, reduce_to(&g.map(|x| -x), self.shape(*b)));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let ga = broadcast_zip(g, vb, g.shape(), |x, y| x * y);
                    self.accumulate(grads, *a, reduce_to(&ga, va.shape()));
                }
                if self.rg(*b) {
                    let gb = broadcast_zip(g, va, g.shape(), |x, y| x * y);
                    self.accumulate(grads, *b, reduce_to(&gb, vb.shape()));
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.map(|x| k * x)),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::Tanh(a) => self.accumulate(grads, *a, g.zip_map(y, |g, y| g * (1.0 - y * y))),
            Op::Sigmoid(a) => self.accumulate(grads, *a, g.zip_map(y, |g, y| g * y * (1.0 - y))),
            Op::Log(a) => self.accumulate(grads, *a, g.zip_map(self.value(*a), |g, x| g / x)),
            Op::Exp(a) => self.accumulate(grads, *a, g.zip_map(y, |g, y| g * y)),
            Op::Softplus(a) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*a), |g, x| g * sigmoid(x)))
            }
            Op::Square(a) => {
                self.accumulate(grads, *a, g.zip_map(self.value(*a), |g, x| 2.0 * g * x))
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    if self.rg(p) {
                        let mut data = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row_slice(r)[start..start + w]);
                        }
                        self.accumulate(grads, p, Tensor::new(g.rows(), w, data)?);
                    }
                    start += w;
                }
            }
            Op::SliceCols(a, start) => {
                let [rows, cols] = self.shape(*a);
                let mut out = Tensor::zeros(rows, cols);
                let w = g.cols();
                let d = out.data_mut();
                for r in 0..rows {
                    d[r * cols + start..r * cols + start + w].copy_from_slice(g.row_slice(r));
                }
                self.accumulate(grads, *a, out);
            }
            Op::Mean(a) => {
                let [r, c] = self.shape(*a);
                self.accumulate(grads, *a, Tensor::full(r, c, g.item() / (r * c) as f64));
            }
            Op::Sum(a) => {
                let [r, c] = self.shape(*a);
                self.accumulate(grads, *a, Tensor::full(r, c, g.item()));
            }
            Op::RowSum(a) => {
                let [r, c] = self.shape(*a);
                let data = (0..r).flat_map(|i| std::iter::repeat_n(g.get(i, 0), c)).collect();
                self.accumulate(grads, *a, Tensor::new(r, c, data)?);
            }
            Op::Clip(a, lo, hi) => {
                let ga = g.zip_map(self.value(*a), |g, x| if x > *lo && x < *hi { g } else { 0.0 });
                self.accumulate(grads, *a, ga);
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let mut ga = g.clone();
                let mut gb = g.clone();
                for (k, (&x, &y)) in va.data().iter().zip(vb.data()).enumerate() {
                    if x <= y {
                        gb.data_mut()[k] = 0.0;
                    } else {
                        ga.data_mut()[k] = 0.0;
                    }
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::LogSoftmax(a) => {
                let mut ga = g.clone();
                let cols = y.cols();
                for r in 0..y.rows() {
                    let gs: f64 = g.row_slice(r).iter().sum();
                    for c in 0..cols {
                        ga.data_mut()[r * cols + c] -= y.get(r, c).exp() * gs;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Select(a, idx) => {
                let [rows, cols] = self.shape(*a);
                let mut out = Tensor::zeros(rows, cols);
                for (r, &c) in idx.iter().enumerate() {
                    out.data_mut()[r * cols + c] = g.get(r, 0);
                }
                self.accumulate(grads, *a, out);
            }
        }
        Ok(())
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<Option<Var>>,
}

impl Gradients {
    /// Gradient for a node, `None` when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for a node, zeros when the loss does not depend on it.
    pub fn wrt(&self, g: &Graph, v: Var) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| {
            let [r, c] = g.shape(v);
            Tensor::zeros(r, c)
        })
    }

    /// One gradient per stored parameter, in id order; unused parameters get zeros.
    pub fn param_grads(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .ids()
            .map(|id| {
                self.params
                    .get(id.0)
                    .copied()
                    .flatten()
                    .and_then(|v| self.get(v).cloned())
                    .unwrap_or_else(|| {
                        let [r, c] = store.get(id).shape();
                        Tensor::zeros(r, c)
                    })
            })
            .collect()
    }
}
