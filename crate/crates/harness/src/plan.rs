//! Experiment plans, the cells they expand into, and the content keys that
//! identify cells, trained policies and predictors in a results store.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hvac_core::controllers::MpcConfig;
use hvac_core::domain::{ScenarioId, ScenarioSpec, SimConfig};
use hvac_predictor::PredictorConfig;
use hvac_ppo::PpoConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const DEFAULT_BETAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const DEFAULT_P_MAX_GRID: [f64; 5] = [0.5, 0.625, 0.75, 0.875, 1.0];
pub const DEFAULT_RUNS: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    /// PPO policy trained with simulated occupant feedback.
    Hitl,
    Rule,
    Mpc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Hitl, ControllerKind::Rule, ControllerKind::Mpc];
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Hitl => "hitl",
            ControllerKind::Rule => "rule",
            ControllerKind::Mpc => "mpc",
        })
    }
}

impl FromStr for ControllerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hitl" | "rl" => Ok(ControllerKind::Hitl),
            "rule" => Ok(ControllerKind::Rule),
            "mpc" => Ok(ControllerKind::Mpc),
            other => Err(HarnessError::InvalidPlan(format!("unknown controller {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// Bundled semi-Markov generator.
    Synth { days: usize, seed: u64 },
    /// Binary dataset written by `ingest`.
    Dataset { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    pub train_days: usize,
    pub test_days: usize,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            source: DataSource::Synth { days: 30, seed: 0 },
            train_days: 23,
            test_days: 7,
        }
    }
}

/// Scenario x beta x seed matrix over a set of controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub data: DataSpec,
    pub scenarios: Vec<ScenarioId>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub controllers: Vec<ControllerKind>,
    /// Override cap the HITL policies are trained with.
    pub train_p_max: f64,
    /// Override caps the cells are evaluated at.
    pub eval_p_max: Vec<f64>,
    pub ppo: PpoConfig,
    pub predictor: PredictorConfig,
    pub mpc: MpcConfig,
    /// Train HITL policies (and the predictor) that are not in the store yet.
    /// When false, cells without a stored checkpoint are marked failed.
    pub train_missing: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            scenarios: ScenarioId::ALL.to_vec(),
            betas: DEFAULT_BETAS.to_vec(),
            seeds: (0..DEFAULT_RUNS).collect(),
            controllers: ControllerKind::ALL.to_vec(),
            train_p_max: 1.0,
            eval_p_max: vec![1.0],
            ppo: PpoConfig::default(),
            predictor: PredictorConfig::default(),
            mpc: MpcConfig::default(),
            train_missing: true,
        }
    }
}

/// One evaluation run: a controller on the test split under one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub controller: ControllerKind,
    pub scenario: ScenarioId,
    pub beta: f64,
    pub train_p_max: f64,
    pub eval_p_max: f64,
    pub seed: u64,
}

impl Cell {
    /// Simulator config the cell is evaluated under.
    pub fn eval_config(&self) -> SimConfig {
        sim_config(self.scenario, self.beta, self.eval_p_max, self.seed)
    }

    /// Simulator config the cell's policy is trained under.
    pub fn train_config(&self) -> SimConfig {
        sim_config(self.scenario, self.beta, self.train_p_max, self.seed)
    }

    /// Total order used for every listing: controller, scenario, beta, p_max, seed.
    pub fn order(&self, other: &Self) -> std::cmp::Ordering {
        self.controller
            .cmp(&other.controller)
            .then(self.scenario.cmp(&other.scenario))
            .then(self.beta.total_cmp(&other.beta))
            .then(self.train_p_max.total_cmp(&other.train_p_max))
            .then(self.eval_p_max.total_cmp(&other.eval_p_max))
            .then(self.seed.cmp(&other.seed))
    }
}

pub fn sim_config(scenario: ScenarioId, beta: f64, p_max: f64, seed: u64) -> SimConfig {
    SimConfig::for_scenario(ScenarioSpec::preset(scenario).with_beta(beta).with_p_max(p_max).with_seed(seed))
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("plan values serialize");
    hex::encode(Sha256::digest(bytes))
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidPlan(m));
        if self.scenarios.is_empty() || self.betas.is_empty() || self.seeds.is_empty() {
            return bad("scenarios, betas and seeds must be non-empty".into());
        }
        if self.controllers.is_empty() || self.eval_p_max.is_empty() {
            return bad("controllers and eval_p_max must be non-empty".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return bad(format!("beta {b} outside [0, 1]"));
        }
        if let Some(p) = self.eval_p_max.iter().chain([&self.train_p_max]).find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return bad(format!("p_max {p} outside (0, 1]"));
        }
        if self.data.train_days == 0 || self.data.test_days == 0 {
            return bad("train_days and test_days must be positive".into());
        }
        self.ppo.validate()?;
        self.predictor.validate()?;
        self.mpc.validate()?;
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| HarnessError::InvalidPlan(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&s).map_err(|e| HarnessError::format(path, e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    /// Every cell, in [`Cell::order`].
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &controller in &self.controllers {
            for &scenario in &self.scenarios {
                for &beta in &self.betas {
                    for &eval_p_max in &self.eval_p_max {
                        for &seed in &self.seeds {
                            out.push(Cell {
                                controller,
                                scenario,
                                beta,
                                train_p_max: self.train_p_max,
                                eval_p_max,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out.sort_by(Cell::order);
        out.dedup_by(|a, b| a.order(b).is_eq());
        out
    }

    pub fn predictor_key(&self) -> String {
        digest(&("predictor", &self.data, &self.predictor))
    }

    /// Key of the policy a HITL cell evaluates.
    pub fn policy_key(&self, cell: &Cell) -> String {
        let predictor = (cell.scenario == ScenarioId::S4).then(|| self.predictor_key());
        let ppo = PpoConfig {
            seed: cell.seed,
            ..self.ppo.clone()
        };
        digest(&("policy", &self.data, ppo.run_hash(&cell.train_config()), predictor))
    }

    /// Key of a cell's result: everything that can change its records.
    pub fn cell_key(&self, cell: &Cell) -> String {
        let controller = match cell.controller {
            ControllerKind::Hitl => Some(self.policy_key(cell)),
            ControllerKind::Mpc => Some(digest(&self.mpc)),
            ControllerKind::Rule => None,
        };
        let predictor = (cell.scenario == ScenarioId::S4).then(|| self.predictor_key());
        digest(&("cell", &self.data, cell, cell.eval_config().to_toml_string(), controller, predictor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_shape() {
        let plan = ExperimentPlan::default();
        plan.validate().unwrap();
        assert_eq!(plan.cells().len(), 3 * 4 * 5 * 25);
    }

    #[test]
    fn keys_separate_what_matters() {
        let plan = ExperimentPlan::default();
        let cells = plan.cells();
        let a = cells[0];
        let b = Cell { seed: a.seed + 1, ..a };
        assert_ne!(plan.cell_key(&a), plan.cell_key(&b));
        assert_ne!(plan.policy_key(&a), plan.policy_key(&b));
        // evaluation p_max changes the cell but not the policy
        let c = Cell { eval_p_max: 0.5, ..a };
        assert_ne!(plan.cell_key(&a), plan.cell_key(&c));
        assert_eq!(plan.policy_key(&a), plan.policy_key(&c));
        // rule cells ignore training settings
        let rule = Cell { controller: ControllerKind::Rule, ..a };
        let mut other = plan.clone();
        other.ppo.learning_rate = 1e-3;
        assert_eq!(plan.cell_key(&rule), other.cell_key(&rule));
        assert_ne!(plan.cell_key(&a), other.cell_key(&a));
    }

    #[test]
    fn plan_toml_round_trip() {
        let mut plan = ExperimentPlan::default();
        plan.betas = vec![0.5];
        plan.controllers = vec![ControllerKind::Rule];
        let back = ExperimentPlan::from_toml_str(&plan.to_toml_string()).unwrap();
        assert_eq!(back, plan);
        let partial = ExperimentPlan::from_toml_str("seeds = [3]\nbetas = [0.9]\n").unwrap();
        assert_eq!(partial.seeds, vec![3]);
        assert_eq!(partial.scenarios, ScenarioId::ALL.to_vec());
    }
}
