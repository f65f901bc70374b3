//! Report emission from a results store.
//!
//! `emit_report` writes four files into an output directory:
//!
//! - `results.csv`: one row per stored cell (failed cells included, with their reason).
//!   Not-applicable values are written as `NA`. Floats use shortest round-trip
//!   formatting, so [`read_results_csv`] recovers them exactly.
//! - `cost_by_beta.csv`: total-cost five-number summaries per controller, scenario and beta.
//! - `sensitivity.csv`: median metrics per controller, scenario and evaluation override cap.
//! - `summary.txt`: per-controller aggregates and metric orderings.
//!
//! Output depends only on the store contents, so regenerating is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hvac_core::domain::ScenarioId;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::metrics::{mean, median, Distribution};
use crate::plan::ControllerKind;
use crate::store::{write_atomic, CellOutcome, CellResult, ResultsStore};

const NA: &str = "NA";

const COLUMNS: [&str; 17] = [
    "config_hash",
    "controller",
    "scenario",
    "beta",
    "train_p_max",
    "eval_p_max",
    "seed",
    "status",
    "episodes",
    "occupied_steps",
    "violation_probability",
    "mae_to_setpoint",
    "energy_cost",
    "discomfort_cost",
    "total_cost",
    "override_count",
    "reason",
];

/// Flat form of a [`CellResult`]; metric fields are `None` for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub controller: ControllerKind,
    pub scenario: ScenarioId,
    pub beta: f64,
    pub train_p_max: f64,
    pub eval_p_max: f64,
    pub seed: u64,
    pub ok: bool,
    pub episodes: Option<usize>,
    pub occupied_steps: Option<usize>,
    pub violation_probability: Option<f64>,
    pub mae_to_setpoint: Option<f64>,
    pub energy_cost: Option<f64>,
    pub discomfort_cost: Option<f64>,
    pub total_cost: Option<f64>,
    pub override_count: Option<usize>,
    pub reason: String,
}

pub fn results_rows(results: &[CellResult]) -> Vec<ResultRow> {
    results
        .iter()
        .map(|r| {
            let m = r.metrics();
            ResultRow {
                config_hash: r.key.clone(),
                controller: r.cell.controller,
                scenario: r.cell.scenario,
                beta: r.cell.beta,
                train_p_max: r.cell.train_p_max,
                eval_p_max: r.cell.eval_p_max,
                seed: r.cell.seed,
                ok: m.is_some(),
                episodes: m.map(|m| m.episodes),
                occupied_steps: m.map(|m| m.occupied_steps),
                violation_probability: m.and_then(|m| m.violation_probability),
                mae_to_setpoint: m.and_then(|m| m.mae_to_setpoint),
                energy_cost: m.map(|m| m.energy_cost),
                discomfort_cost: m.map(|m| m.discomfort_cost),
                total_cost: m.map(|m| m.total_cost),
                override_count: m.map(|m| m.override_count),
                reason: match &r.outcome {
                    CellOutcome::Ok { .. } => String::new(),
                    CellOutcome::Failed { reason } => reason.clone(),
                },
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| NA.to_string(), |v| v.to_string())
}

fn results_csv(rows: &[ResultRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.config_hash.clone(),
            r.controller.to_string(),
            r.scenario.to_string(),
            r.beta.to_string(),
            r.train_p_max.to_string(),
            r.eval_p_max.to_string(),
            r.seed.to_string(),
            if r.ok { "ok" } else { "failed" }.to_string(),
            opt(r.episodes),
            opt(r.occupied_steps),
            opt(r.violation_probability),
            opt(r.mae_to_setpoint),
            opt(r.energy_cost),
            opt(r.discomfort_cost),
            opt(r.total_cost),
            opt(r.override_count),
            r.reason.clone(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Parse a `results.csv` written by [`emit_report`].
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| HarnessError::format(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| HarnessError::format(path, e.to_string()))?;
    if header.iter().ne(COLUMNS) {
        return Err(HarnessError::format(path, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::format(path, e.to_string()))?;
        let bad = |field: &str| HarnessError::format(path, format!("row {}: bad {field}", line + 1));
        fn parse<T: std::str::FromStr>(s: &str) -> Option<T> {
            s.parse().ok()
        }
        fn parse_opt<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
            if s == NA {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        }
        let f = |i: usize| &rec[i];
        rows.push(ResultRow {
            config_hash: f(0).to_string(),
            controller: f(1).parse().map_err(|_| bad("controller"))?,
            scenario: f(2).parse().map_err(|_| bad("scenario"))?,
            beta: parse(f(3)).ok_or_else(|| bad("beta"))?,
            train_p_max: parse(f(4)).ok_or_else(|| bad("train_p_max"))?,
            eval_p_max: parse(f(5)).ok_or_else(|| bad("eval_p_max"))?,
            seed: parse(f(6)).ok_or_else(|| bad("seed"))?,
            ok: match f(7) {
                "ok" => true,
                "failed" => false,
                _ => return Err(bad("status")),
            },
            episodes: parse_opt(f(8)).ok_or_else(|| bad("episodes"))?,
            occupied_steps: parse_opt(f(9)).ok_or_else(|| bad("occupied_steps"))?,
            violation_probability: parse_opt(f(10)).ok_or_else(|| bad("violation_probability"))?,
            mae_to_setpoint: parse_opt(f(11)).ok_or_else(|| bad("mae_to_setpoint"))?,
            energy_cost: parse_opt(f(12)).ok_or_else(|| bad("energy_cost"))?,
            discomfort_cost: parse_opt(f(13)).ok_or_else(|| bad("discomfort_cost"))?,
            total_cost: parse_opt(f(14)).ok_or_else(|| bad("total_cost"))?,
            override_count: parse_opt(f(15)).ok_or_else(|| bad("override_count"))?,
            reason: f(16).to_string(),
        });
    }
    Ok(rows)
}

/// Per-controller aggregates over cells evaluated at their training override cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerAggregate {
    pub controller: ControllerKind,
    pub cells: usize,
    pub failed: usize,
    /// Mean over cells of the per-cell violation probability.
    pub mean_violation: Option<f64>,
    pub mean_mae: Option<f64>,
    pub median_energy: Option<f64>,
    pub median_total: Option<f64>,
}

fn at_training_cap(r: &CellResult) -> bool {
    r.cell.eval_p_max == r.cell.train_p_max
}

pub fn controller_aggregates(results: &[CellResult]) -> Vec<ControllerAggregate> {
    let mut by: BTreeMap<ControllerKind, Vec<&CellResult>> = BTreeMap::new();
    for r in results.iter().filter(|r| at_training_cap(r)) {
        by.entry(r.cell.controller).or_default().push(r);
    }
    by.into_iter()
        .map(|(controller, rs)| {
            let ok: Vec<_> = rs.iter().filter_map(|r| r.metrics()).collect();
            let collect = |f: &dyn Fn(&crate::metrics::MetricsSummary) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|m| f(m)).collect()
            };
            ControllerAggregate {
                controller,
                cells: rs.len(),
                failed: rs.len() - ok.len(),
                mean_violation: mean(&collect(&|m| m.violation_probability)),
                mean_mae: mean(&collect(&|m| m.mae_to_setpoint)),
                median_energy: median(&collect(&|m| Some(m.energy_cost))),
                median_total: median(&collect(&|m| Some(m.total_cost))),
            }
        })
        .collect()
}

/// Total-cost distribution per (controller, scenario, beta) at the training cap.
pub fn cost_by_beta(results: &[CellResult]) -> Vec<(ControllerKind, ScenarioId, f64, Distribution)> {
    let mut groups: Vec<((ControllerKind, ScenarioId, f64), Vec<f64>)> = Vec::new();
    for r in results.iter().filter(|r| at_training_cap(r)) {
        let Some(m) = r.metrics() else { continue };
        let k = (r.cell.controller, r.cell.scenario, r.cell.beta);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(m.total_cost),
            None => groups.push((k, vec![m.total_cost])),
        }
    }
    groups.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)).then(a.0 .2.total_cmp(&b.0 .2)));
    groups
        .into_iter()
        .filter_map(|((c, s, b), v)| Distribution::of(&v).map(|d| (c, s, b, d)))
        .collect()
}

/// Median metrics per (controller, scenario, evaluation cap), pooled over betas and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub controller: ControllerKind,
    pub scenario: ScenarioId,
    pub eval_p_max: f64,
    pub n: usize,
    pub median_mae: Option<f64>,
    pub median_violation: Option<f64>,
    pub median_total: Option<f64>,
}

pub fn sensitivity_points(results: &[CellResult]) -> Vec<SensitivityPoint> {
    let mut groups: Vec<((ControllerKind, ScenarioId, f64), Vec<&CellResult>)> = Vec::new();
    for r in results.iter().filter(|r| r.is_ok()) {
        let k = (r.cell.controller, r.cell.scenario, r.cell.eval_p_max);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)).then(a.0 .2.total_cmp(&b.0 .2)));
    groups
        .into_iter()
        .map(|((controller, scenario, eval_p_max), rs)| {
            let ms: Vec<_> = rs.iter().filter_map(|r| r.metrics()).collect();
            let pick = |f: &dyn Fn(&crate::metrics::MetricsSummary) -> Option<f64>| -> Option<f64> {
                median(&ms.iter().filter_map(|m| f(m)).collect::<Vec<_>>())
            };
            SensitivityPoint {
                controller,
                scenario,
                eval_p_max,
                n: ms.len(),
                median_mae: pick(&|m| m.mae_to_setpoint),
                median_violation: pick(&|m| m.violation_probability),
                median_total: pick(&|m| Some(m.total_cost)),
            }
        })
        .collect()
}

/// Relative MAE variation of `controller` across evaluation caps, per scenario:
/// `(max - min) / mean` of the per-cap median MAE. Scenarios with fewer than two
/// caps are omitted.
pub fn mae_variation(results: &[CellResult], controller: ControllerKind) -> BTreeMap<ScenarioId, f64> {
    let mut by: BTreeMap<ScenarioId, Vec<f64>> = BTreeMap::new();
    for p in sensitivity_points(results).into_iter().filter(|p| p.controller == controller) {
        if let Some(m) = p.median_mae {
            by.entry(p.scenario).or_default().push(m);
        }
    }
    by.into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .filter_map(|(s, v)| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            mean(&v).filter(|m| *m > 0.0).map(|m| (s, (hi - lo) / m))
        })
        .collect()
}

fn cost_by_beta_csv(results: &[CellResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["controller", "scenario", "beta", "n", "min", "q1", "median", "q3", "max"])
        .expect("in-memory write");
    for (c, s, b, d) in cost_by_beta(results) {
        w.write_record([
            c.to_string(),
            s.to_string(),
            b.to_string(),
            d.n.to_string(),
            d.min.to_string(),
            d.q1.to_string(),
            d.median.to_string(),
            d.q3.to_string(),
            d.max.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn sensitivity_csv(results: &[CellResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["controller", "scenario", "eval_p_max", "n", "median_mae", "median_violation", "median_total"])
        .expect("in-memory write");
    for p in sensitivity_points(results) {
        w.write_record([
            p.controller.to_string(),
            p.scenario.to_string(),
            p.eval_p_max.to_string(),
            p.n.to_string(),
            opt(p.median_mae),
            opt(p.median_violation),
            opt(p.median_total),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{v:.4}"))
}

fn summary_text(results: &[CellResult]) -> String {
    let failed = results.iter().filter(|r| !r.is_ok()).count();
    let mut s = String::new();
    let _ = writeln!(s, "cells: {} (ok {}, failed {})", results.len(), results.len() - failed, failed);
    let _ = writeln!(s);
    let _ = writeln!(s, "controller  cells  failed  mean_violation  mean_mae  median_energy  median_total");
    let aggs = controller_aggregates(results);
    for a in &aggs {
        let _ = writeln!(
            s,
            "{:<10}  {:>5}  {:>6}  {:>14}  {:>8}  {:>13}  {:>12}",
            a.controller.to_string(),
            a.cells,
            a.failed,
            fmt4(a.mean_violation),
            fmt4(a.mean_mae),
            fmt4(a.median_energy),
            fmt4(a.median_total)
        );
    }
    let get = |c: ControllerKind| aggs.iter().find(|a| a.controller == c);
    let verdict = |b: Option<bool>| match b {
        Some(true) => "holds",
        Some(false) => "does not hold",
        None => "not applicable",
    };
    let _ = writeln!(s);
    let _ = writeln!(s, "orderings");
    let (h, r, m) = (get(ControllerKind::Hitl), get(ControllerKind::Rule), get(ControllerKind::Mpc));
    let viol = |a: Option<&ControllerAggregate>| a.and_then(|a| a.mean_violation);
    let mae = |a: Option<&ControllerAggregate>| a.and_then(|a| a.mean_mae);
    let energy = |a: Option<&ControllerAggregate>| a.and_then(|a| a.median_energy);
    let chain = match (viol(m), viol(r), viol(h)) {
        (Some(m), Some(r), Some(h)) => Some(m <= r && r <= h),
        _ => None,
    };
    let _ = writeln!(
        s,
        "  violation mpc <= rule <= hitl: {} ({} / {} / {})",
        verdict(chain),
        fmt4(viol(m)),
        fmt4(viol(r)),
        fmt4(viol(h))
    );
    let rule_mae = match (mae(r), mae(h), mae(m)) {
        (Some(r), Some(h), Some(m)) => Some(r < h && r < m),
        _ => None,
    };
    let _ = writeln!(
        s,
        "  mae rule smallest: {} (rule {} / hitl {} / mpc {})",
        verdict(rule_mae),
        fmt4(mae(r)),
        fmt4(mae(h)),
        fmt4(mae(m))
    );
    let rule_energy = match (energy(r), energy(m)) {
        (Some(r), Some(m)) => Some(r > m),
        _ => None,
    };
    let _ = writeln!(
        s,
        "  energy rule > mpc: {} (rule {} / mpc {})",
        verdict(rule_energy),
        fmt4(energy(r)),
        fmt4(energy(m))
    );
    let variation = mae_variation(results, ControllerKind::Hitl);
    if !variation.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "hitl mae variation across override caps");
        for (sc, v) in &variation {
            let _ = writeln!(s, "  {sc}: {:.4}", v);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub cost_by_beta: PathBuf,
    pub sensitivity: PathBuf,
    pub summary: PathBuf,
}

pub fn emit_report(store: &ResultsStore, out_dir: &Path) -> Result<ReportFiles> {
    let results = store.cells()?;
    if results.is_empty() {
        return Err(HarnessError::EmptyStore(store.root().to_path_buf()));
    }
    let files = ReportFiles {
        results: out_dir.join("results.csv"),
        cost_by_beta: out_dir.join("cost_by_beta.csv"),
        sensitivity: out_dir.join("sensitivity.csv"),
        summary: out_dir.join("summary.txt"),
    };
    write_atomic(&files.results, &results_csv(&results_rows(&results)))?;
    write_atomic(&files.cost_by_beta, &cost_by_beta_csv(&results))?;
    write_atomic(&files.sensitivity, &sensitivity_csv(&results))?;
    write_atomic(&files.summary, summary_text(&results).as_bytes())?;
    Ok(files)
}
