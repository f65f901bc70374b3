//! Central finite-difference gradient checks.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::tensor::Tensor;

/// Step and error floor for [`check_inputs`] and [`check_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Denominator floor: error = |a - n| / max(|a|, |n|, floor).
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { h: 1e-5, floor: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn eval_scalar(g: &Graph, v: Var) -> f64 {
    g.value(v).item()
}

/// Compare analytic and numeric gradients of `f` with respect to every entry of `inputs`.
pub fn check_inputs<F>(inputs: &[Tensor], cfg: GradCheckConfig, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let run = |ts: &[Tensor]| -> Result<(Graph, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.input(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok((g, vars, out))
    };
    let (g, vars, out) = run(inputs)?;
    let grads = g.backward(out)?;
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0 };
    let mut probe = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(&g, *v);
        for k in 0..inputs[i].len() {
            let x0 = inputs[i].data()[k];
            probe[i].data_mut()[k] = x0 + cfg.h;
            let (gp, _, op) = run(&probe)?;
            probe[i].data_mut()[k] = x0 - cfg.h;
            let (gm, _, om) = run(&probe)?;
            probe[i].data_mut()[k] = x0;
            let numeric = (eval_scalar(&gp, op) - eval_scalar(&gm, om)) / (2.0 * cfg.h);
            let err = relative_error(analytic.data()[k], numeric, cfg.floor);
            report.max_rel_error = report.max_rel_error.max(err);
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Same as [`check_inputs`] but over every scalar of a parameter store. `f` builds the loss
/// from a fresh graph; the store is restored before returning.
pub fn check_params<F>(store: &mut ParamStore, cfg: GradCheckConfig, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let analytic = g.backward(out)?.param_grads(store);
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0 };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..store.get(id).len() {
            let x0 = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = x0 + cfg.h;
            let mut gp = Graph::new();
            let op = f(&mut gp, store)?;
            store.get_mut(id).data_mut()[k] = x0 - cfg.h;
            let mut gm = Graph::new();
            let om = f(&mut gm, store)?;
            store.get_mut(id).data_mut()[k] = x0;
            let numeric = (eval_scalar(&gp, op) - eval_scalar(&gm, om)) / (2.0 * cfg.h);
            let err = relative_error(analytic[pi].data()[k], numeric, cfg.floor);
            report.max_rel_error = report.max_rel_error.max(err);
            report.checked += 1;
        }
    }
    Ok(report)
}

type OpFn = fn(&mut Graph, &[Var]) -> Result<Var>;

/// Random input shapes and value generator for one op in [`op_suite`].
struct OpCase {
    name: &'static str,
    shapes: &'static [[usize; 2]],
    sample: fn(&mut dyn rand::RngCore) -> f64,
    f: OpFn,
}

fn any(rng: &mut dyn rand::RngCore) -> f64 {
    use rand::Rng;
    rng.random_range(-2.0..2.0)
}

fn positive(rng: &mut dyn rand::RngCore) -> f64 {
    use rand::Rng;
    rng.random_range(0.2..3.0)
}

/// Values at least 0.01 away from the clip bounds used below.
fn off_kink(rng: &mut dyn rand::RngCore) -> f64 {
    use rand::Rng;
    loop {
        let x: f64 = rng.random_range(-2.0..2.0);
        if (x - 0.5).abs() > 0.01 && (x + 0.5).abs() > 0.01 {
            return x;
        }
    }
}

const CASES: &[OpCase] = &[
    OpCase { name: "matmul", shapes: &[[3, 4], [4, 2]], sample: any, f: |g, v| g.matmul(v[0], v[1]) },
    OpCase { name: "add", shapes: &[[3, 4], [3, 4]], sample: any, f: |g, v| g.add(v[0], v[1]) },
    OpCase { name: "add_broadcast", shapes: &[[3, 4], [1, 4]], sample: any, f: |g, v| g.add(v[0], v[1]) },
    OpCase { name: "sub", shapes: &[[3, 4], [3, 1]], sample: any, f: |g, v| g.sub(v[0], v[1]) },
    OpCase { name: "mul", shapes: &[[3, 4], [1, 4]], sample: any, f: |g, v| g.mul(v[0], v[1]) },
    OpCase { name: "scale", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.scale(v[0], -1.7)) },
    OpCase { name: "add_scalar", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.add_scalar(v[0], 0.3)) },
    OpCase { name: "tanh", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.tanh(v[0])) },
    OpCase { name: "sigmoid", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.sigmoid(v[0])) },
    OpCase { name: "log", shapes: &[[2, 3]], sample: positive, f: |g, v| Ok(g.log(v[0])) },
    OpCase { name: "exp", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.exp(v[0])) },
    OpCase { name: "softplus", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.softplus(v[0])) },
    OpCase { name: "square", shapes: &[[2, 3]], sample: any, f: |g, v| Ok(g.square(v[0])) },
    OpCase { name: "concat", shapes: &[[2, 3], [2, 2]], sample: any, f: |g, v| g.concat_cols(v) },
    OpCase { name: "slice", shapes: &[[2, 5]], sample: any, f: |g, v| g.slice_cols(v[0], 1, 4) },
    OpCase { name: "mean", shapes: &[[3, 4]], sample: any, f: |g, v| Ok(g.mean(v[0])) },
    OpCase { name: "sum", shapes: &[[3, 4]], sample: any, f: |g, v| Ok(g.sum(v[0])) },
    OpCase { name: "row_sum", shapes: &[[3, 4]], sample: any, f: |g, v| Ok(g.row_sum(v[0])) },
    OpCase { name: "clip", shapes: &[[3, 4]], sample: off_kink, f: |g, v| g.clip(v[0], -0.5, 0.5) },
    OpCase { name: "minimum", shapes: &[[3, 4], [3, 4]], sample: any, f: |g, v| g.minimum(v[0], v[1]) },
    OpCase { name: "log_softmax", shapes: &[[3, 4]], sample: any, f: |g, v| Ok(g.log_softmax(v[0])) },
    OpCase { name: "softmax", shapes: &[[3, 2]], sample: any, f: |g, v| Ok(g.softmax(v[0])) },
    OpCase { name: "select", shapes: &[[3, 4]], sample: any, f: |g, v| g.select(v[0], &[2, 0, 3]) },
];

/// Names of the ops covered by [`op_suite`].
pub fn op_names() -> Vec<&'static str> {
    CASES.iter().map(|c| c.name).collect()
}

/// Finite-difference check of every tape op over `trials` random inputs each.
/// Each op output is reduced to a scalar by a random weighted sum. Returns the worst
/// relative error per op.
pub fn op_suite<R: rand::Rng>(trials: usize, cfg: GradCheckConfig, rng: &mut R) -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::with_capacity(CASES.len());
    for case in CASES {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let inputs: Vec<Tensor> = case
                .shapes
                .iter()
                .map(|&[r, c]| {
                    let data = (0..r * c).map(|_| (case.sample)(rng)).collect();
                    Tensor::new(r, c, data)
                })
                .collect::<Result<_>>()?;
            let mut probe = Graph::new();
            let pv: Vec<Var> = inputs.iter().map(|t| probe.constant(t.clone())).collect();
            let y = (case.f)(&mut probe, &pv)?;
            let [r, c] = probe.shape(y);
            let weights = Tensor::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())?;
            let f = case.f;
            let report = check_inputs(&inputs, cfg, |g, v| {
                let y = f(g, v)?;
                let w = g.constant(weights.clone());
                let yw = g.mul(y, w)?;
                Ok(g.sum(yw))
            })?;
            worst = worst.max(report.max_rel_error);
        }
        out.push((case.name, worst));
    }
    Ok(out)
}
