//! Perfect-forecast rolling-horizon controller.
//!
//! The indoor temperature is one-dimensional and the dynamics are affine in
//! it, so the optimal cost-to-go over binary action sequences is a
//! piecewise-constant function of temperature: each action sequence is
//! feasible on an interval of starting temperatures and has a fixed energy
//! cost. The backward pass computes these functions exactly as sorted lists
//! of intervals; no temperature grid is involved and the plan is the true
//! optimum. The grid resolution is used only by the penalised fallback
//! when no sequence can keep every occupied step inside the band.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Action, ComfortModel, ExogenousTraces, RunRng, ThermalParams};
use crate::env::{alpha, energy_cost, thermal_step, DecisionContext, Policy};
use crate::error::{Error, Result};

/// Constraint bounds are tightened by this much so rounding in the forward
/// simulation can never leave the true band.
const BAND_MARGIN: f64 = 1e-9;
/// Lookup tolerance when reading the cost-to-go at a simulated temperature.
const LOOKUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub horizon_steps: usize,
    /// Temperature bucket width of the penalised fallback, degC.
    pub grid_degc: f64,
    /// Fallback cost per degC of band violation per occupied step.
    pub penalty_per_degc: f64,
    /// Comfort band override; defaults to the setpoint +/- comfort range.
    pub band: Option<(f64, f64)>,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 96,
            grid_degc: 0.05,
            penalty_per_degc: 1e6,
            band: None,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 {
            return Err(Error::InvalidConfig("horizon_steps must be at least 1".into()));
        }
        if !(self.grid_degc > 0.0) {
            return Err(Error::InvalidConfig("grid_degc must be positive".into()));
        }
        if let Some((lo, hi)) = self.band {
            if !(lo < hi) {
                return Err(Error::InvalidConfig("band lower bound must be below upper".into()));
            }
        }
        Ok(())
    }

    pub fn band_for(&self, comfort: &ComfortModel) -> (f64, f64) {
        self.band.unwrap_or_else(|| comfort.band())
    }
}

/// Perfect forecasts over a planning window of `H` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcWindow {
    /// Outdoor temperature during each of the `H` steps.
    pub t_out: Vec<f64>,
    /// Price during each of the `H` steps, $/kWh.
    pub rho: Vec<f64>,
    /// Occupancy at states `0..=H`; the band binds at states `1..=H` where occupied.
    pub occupied: Vec<bool>,
}

impl MpcWindow {
    /// Window starting at absolute trace index `index`, truncated at the
    /// trace end. States past the end count as unoccupied.
    pub fn from_traces(traces: &ExogenousTraces, index: usize, horizon: usize) -> Self {
        let end = (index + horizon).min(traces.len());
        let occupied = (index..=end)
            .map(|i| traces.occupancy.get(i).copied().unwrap_or(false))
            .collect();
        Self {
            t_out: traces.t_out_degc[index..end].to_vec(),
            rho: traces.rho_per_kwh[index..end].to_vec(),
            occupied,
        }
    }

    pub fn horizon(&self) -> usize {
        self.t_out.len()
    }

    fn validate(&self) -> Result<()> {
        let h = self.horizon();
        if h == 0 {
            return Err(Error::InvalidConfig("planning window is empty".into()));
        }
        if self.rho.len() != h || self.occupied.len() != h + 1 {
            return Err(Error::InvalidConfig(format!(
                "window lengths t_out={}, rho={}, occupied={} (expected {h}, {h}, {})",
                h,
                self.rho.len(),
                self.occupied.len(),
                h + 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcPlan {
    pub actions: Vec<Action>,
    /// Predicted temperatures at states `0..=H`.
    pub temperatures: Vec<f64>,
    pub energy_cost: f64,
    /// Penalty incurred by the fallback; zero for feasible plans.
    pub penalty: f64,
    /// Whether every occupied state stays inside the band.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
}

/// Piecewise-constant function over the real line, pieces `[lo, hi)` sorted
/// and contiguous. `+inf` marks infeasible temperatures.
#[derive(Debug, Clone, PartialEq)]
struct StepFn {
    pieces: Vec<Piece>,
}

impl StepFn {
    fn constant(value: f64) -> Self {
        Self {
            pieces: vec![Piece {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                value,
            }],
        }
    }

    fn push(out: &mut Vec<Piece>, lo: f64, hi: f64, value: f64) {
        if !(hi > lo) {
            return;
        }
        if let Some(last) = out.last_mut() {
            if last.value == value {
                last.hi = hi;
                return;
            }
        }
        out.push(Piece { lo, hi, value });
    }

    /// `x -> self(a * x + b) + c` with `a > 0`.
    fn compose(&self, a: f64, b: f64, c: f64) -> Self {
        let map = |t: f64| if t.is_infinite() { t } else { (t - b) / a };
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            Self::push(&mut pieces, map(p.lo), map(p.hi), p.value + c);
        }
        if let Some(first) = pieces.first_mut() {
            first.lo = f64::NEG_INFINITY;
        }
        if let Some(last) = pieces.last_mut() {
            last.hi = f64::INFINITY;
        }
        Self { pieces }
    }

    fn min(&self, other: &Self) -> Self {
        let (f, g) = (&self.pieces, &other.pieces);
        let mut out = Vec::with_capacity(f.len() + g.len());
        let (mut i, mut j) = (0, 0);
        let mut lo = f64::NEG_INFINITY;
        while i < f.len() && j < g.len() {
            let hi = f[i].hi.min(g[j].hi);
            Self::push(&mut out, lo, hi, f[i].value.min(g[j].value));
            lo = hi;
            if f[i].hi == hi {
                i += 1;
            }
            if g[j].hi == hi {
                j += 1;
            }
        }
        Self { pieces: out }
    }

    /// Infeasible outside `[lo, hi]`.
    fn restrict(&self, lo: f64, hi: f64) -> Self {
        let mut out = Vec::with_capacity(self.pieces.len() + 2);
        for p in &self.pieces {
            let (a, b) = (p.lo.max(lo), p.hi.min(hi));
            if p.lo < lo {
                Self::push(&mut out, p.lo, p.hi.min(lo), f64::INFINITY);
            }
            Self::push(&mut out, a, b, p.value);
            if p.hi > hi {
                Self::push(&mut out, p.lo.max(hi), p.hi, f64::INFINITY);
            }
        }
        Self { pieces: out }
    }

    fn eval(&self, t: f64, tol: f64) -> f64 {
        let idx = self.pieces.partition_point(|p| p.hi <= t - tol);
        self.pieces[idx..]
            .iter()
            .take_while(|p| p.lo <= t + tol)
            .map(|p| p.value)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Minimum-energy binary plan keeping every occupied state in the band.
pub fn mpc_plan(
    window: &MpcWindow,
    t_in: f64,
    thermal: &ThermalParams,
    comfort: &ComfortModel,
    config: &MpcConfig,
) -> Result<MpcPlan> {
    config.validate()?;
    window.validate()?;
    if !t_in.is_finite() {
        return Err(Error::Domain(format!("t_in must be finite, got {t_in}")));
    }
    let (lo, hi) = config.band_for(comfort);
    match exact_plan(window, t_in, thermal, lo, hi) {
        Some(plan) => Ok(plan),
        None => Ok(penalised_plan(window, t_in, thermal, lo, hi, config)),
    }
}

fn exact_plan(
    window: &MpcWindow,
    t_in: f64,
    thermal: &ThermalParams,
    lo: f64,
    hi: f64,
) -> Option<MpcPlan> {
    let h = window.horizon();
    let a = alpha(thermal);
    let drive = |k: usize, u: Action| {
        (1.0 - a) * (window.t_out[k] + thermal.mode.sign() * u.as_f64() * thermal.power_effect_degc)
    };
    let band = (lo + BAND_MARGIN, hi - BAND_MARGIN);
    let bind = |f: StepFn, k: usize| {
        if k >= 1 && window.occupied[k] {
            f.restrict(band.0, band.1)
        } else {
            f
        }
    };

    // values[k] is the optimal cost-to-go from state k.
    let mut values = vec![StepFn::constant(0.0); h + 1];
    values[h] = bind(StepFn::constant(0.0), h);
    for k in (0..h).rev() {
        let next = &values[k + 1];
        let off = next.compose(a, drive(k, Action::Off), energy_cost(Action::Off, window.rho[k], thermal));
        let on = next.compose(a, drive(k, Action::On), energy_cost(Action::On, window.rho[k], thermal));
        values[k] = bind(off.min(&on), k);
    }
    if !values[0].eval(t_in, LOOKUP_TOL).is_finite() {
        return None;
    }

    let mut actions = Vec::with_capacity(h);
    let mut temperatures = Vec::with_capacity(h + 1);
    let mut t = t_in;
    let mut energy = 0.0;
    temperatures.push(t);
    for k in 0..h {
        let mut best: Option<(f64, Action, f64)> = None;
        for u in [Action::Off, Action::On] {
            let next_t = thermal_step(t, window.t_out[k], u, thermal);
            let q = energy_cost(u, window.rho[k], thermal) + values[k + 1].eval(next_t, LOOKUP_TOL);
            // strict comparison keeps Off on exact ties
            if q.is_finite() && best.is_none_or(|(bq, _, _)| q < bq) {
                best = Some((q, u, next_t));
            }
        }
        let (_, u, next_t) = best?;
        energy += energy_cost(u, window.rho[k], thermal);
        actions.push(u);
        temperatures.push(next_t);
        t = next_t;
    }
    let feasible = (1..=h).all(|k| !window.occupied[k] || (lo..=hi).contains(&temperatures[k]));
    Some(MpcPlan {
        actions,
        temperatures,
        energy_cost: energy,
        penalty: 0.0,
        feasible,
    })
}

#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    cost: f64,
    energy: f64,
    penalty: f64,
    parent: usize,
    action: Action,
}

/// Forward search over temperature buckets, keeping the cheapest exact
/// state per bucket, with violations priced instead of forbidden.
fn penalised_plan(
    window: &MpcWindow,
    t_in: f64,
    thermal: &ThermalParams,
    lo: f64,
    hi: f64,
    config: &MpcConfig,
) -> MpcPlan {
    let h = window.horizon();
    let mut stages: Vec<Vec<Node>> = Vec::with_capacity(h + 1);
    stages.push(vec![Node {
        t: t_in,
        cost: 0.0,
        energy: 0.0,
        penalty: 0.0,
        parent: 0,
        action: Action::Off,
    }]);
    for k in 0..h {
        let mut buckets: BTreeMap<i64, Node> = BTreeMap::new();
        for (pi, node) in stages[k].iter().enumerate() {
            for u in [Action::Off, Action::On] {
                let t = thermal_step(node.t, window.t_out[k], u, thermal);
                let e = energy_cost(u, window.rho[k], thermal);
                let violation = if window.occupied[k + 1] {
                    (lo - t).max(0.0) + (t - hi).max(0.0)
                } else {
                    0.0
                };
                let p = config.penalty_per_degc * violation;
                let cand = Node {
                    t,
                    cost: node.cost + e + p,
                    energy: node.energy + e,
                    penalty: node.penalty + p,
                    parent: pi,
                    action: u,
                };
                let key = (t / config.grid_degc).floor() as i64;
                match buckets.get_mut(&key) {
                    Some(existing) if existing.cost <= cand.cost => {}
                    Some(existing) => *existing = cand,
                    None => {
                        buckets.insert(key, cand);
                    }
                }
            }
        }
        stages.push(buckets.into_values().collect());
    }
    let (mut idx, last) = stages[h]
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, n)| (i, *n))
        .expect("non-empty stage");
    let mut actions = vec![Action::Off; h];
    let mut temperatures = vec![0.0; h + 1];
    for k in (1..=h).rev() {
        let n = stages[k][idx];
        actions[k - 1] = n.action;
        temperatures[k] = n.t;
        idx = n.parent;
    }
    temperatures[0] = t_in;
    let feasible = (1..=h).all(|k| !window.occupied[k] || (lo..=hi).contains(&temperatures[k]));
    MpcPlan {
        actions,
        temperatures,
        energy_cost: last.energy,
        penalty: last.penalty,
        feasible,
    }
}

/// Rolling-horizon controller. Reuses the cached plan while the realised
/// temperature matches the prediction bit-for-bit and the remaining plan is
/// at least half a horizon long (or reaches the end of the traces).
#[derive(Debug, Clone)]
pub struct MpcController {
    config: MpcConfig,
    cache: Option<(usize, MpcPlan)>,
    plans_computed: usize,
}

impl MpcController {
    pub fn new(config: MpcConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            cache: None,
            plans_computed: 0,
        })
    }

    pub fn plans_computed(&self) -> usize {
        self.plans_computed
    }

    pub fn current_plan(&self) -> Option<&MpcPlan> {
        self.cache.as_ref().map(|(_, p)| p)
    }

    fn cached_action(&self, index: usize, t_in: f64, traces_len: usize) -> Option<Action> {
        let (start, plan) = self.cache.as_ref()?;
        let offset = index.checked_sub(*start)?;
        if offset >= plan.actions.len() || plan.temperatures[offset].to_bits() != t_in.to_bits() {
            return None;
        }
        let remaining = plan.actions.len() - offset;
        let reaches_end = start + plan.actions.len() >= traces_len;
        if remaining * 2 < self.config.horizon_steps && !reaches_end {
            return None;
        }
        Some(plan.actions[offset])
    }
}

/// First action of a (possibly cached) rolling-horizon plan.
pub fn mpc_act(ctx: &DecisionContext<'_>, controller: &mut MpcController) -> Result<Action> {
    let v = &ctx.view;
    if let Some(a) = controller.cached_action(v.index, v.t_in, v.traces.len()) {
        return Ok(a);
    }
    let window = MpcWindow::from_traces(v.traces, v.index, controller.config.horizon_steps);
    let plan = mpc_plan(&window, v.t_in, v.thermal, &v.comfort, &controller.config)?;
    controller.plans_computed += 1;
    let first = plan.actions[0];
    controller.cache = Some((v.index, plan));
    Ok(first)
}

impl Policy for MpcController {
    fn name(&self) -> &str {
        "mpc"
    }

    fn reset(&mut self) {
        self.cache = None;
    }

    fn act(&mut self, ctx: &DecisionContext<'_>, _rng: &mut RunRng) -> Result<Action> {
        mpc_act(ctx, self)
    }
}
