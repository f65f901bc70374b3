//! TOML run configuration.
//!
//! ```toml
//! [scenario]
//! id = "S1"
//! include_occupancy_now = true
//! occupancy_forecast_source = "perfect"
//! h_t = 8
//! h_o = 8
//! h_rho = 8
//! p_max = 1.0
//! beta = 0.5
//! seed = 0
//!
//! [thermal]
//! rc_hours = 16.5
//! power_effect_degc = 20.0
//! hvac_kw = 3.5
//! mode = "heating"
//! dt_hours = 0.25
//!
//! [comfort]
//! t_set_degc = 22.0
//! theta_range_degc = 3.0
//!
//! [reward]
//! epsilon_bonus = 0.01
//! feedback_horizon = 16
//! discomfort_indexing = "include_current"
//!
//! [episode]
//! steps = 96
//! cycle_steps = 96
//! gamma = 0.99
//! ```
//!
//! Every section except `[scenario]` may be omitted; missing keys take the
//! defaults shown. Unknown keys are rejected. `beta` and `p_max` live only
//! under `[scenario]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{
    ComfortModel, DiscomfortIndexing, RewardParams, ScenarioSpec, ThermalParams,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComfortSection {
    pub t_set_degc: f64,
    pub theta_range_degc: f64,
}

impl Default for ComfortSection {
    fn default() -> Self {
        let c = ComfortModel::default();
        Self {
            t_set_degc: c.t_set_degc,
            theta_range_degc: c.theta_range_degc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub epsilon_bonus: f64,
    pub feedback_horizon: usize,
    pub discomfort_indexing: DiscomfortIndexing,
}

impl Default for RewardSection {
    fn default() -> Self {
        let r = RewardParams::default();
        Self {
            epsilon_bonus: r.epsilon_bonus,
            feedback_horizon: r.feedback_horizon,
            discomfort_indexing: r.discomfort_indexing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSection {
    /// Steps per episode (one day at 15-minute resolution).
    pub steps: usize,
    pub cycle_steps: usize,
    pub gamma: f64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self {
            steps: 96,
            cycle_steps: 96,
            gamma: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub thermal: ThermalParams,
    #[serde(default)]
    pub comfort: ComfortSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub episode: EpisodeSection,
}

impl SimConfig {
    pub fn for_scenario(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            thermal: ThermalParams::default(),
            comfort: ComfortSection::default(),
            reward: RewardSection::default(),
            episode: EpisodeSection::default(),
        }
    }

    pub fn comfort_model(&self) -> ComfortModel {
        ComfortModel {
            t_set_degc: self.comfort.t_set_degc,
            theta_range_degc: self.comfort.theta_range_degc,
            p_max: self.scenario.p_max,
        }
    }

    pub fn reward_params(&self) -> RewardParams {
        RewardParams {
            beta: self.scenario.beta,
            epsilon_bonus: self.reward.epsilon_bonus,
            feedback_horizon: self.reward.feedback_horizon,
            discomfort_indexing: self.reward.discomfort_indexing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.thermal.validate()?;
        self.comfort_model().validate()?;
        self.reward_params().validate()?;
        if self.episode.steps == 0 {
            return Err(Error::InvalidConfig("episode.steps must be at least 1".into()));
        }
        if self.episode.cycle_steps == 0 {
            return Err(Error::InvalidConfig(
                "episode.cycle_steps must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.episode.gamma) {
            return Err(Error::InvalidConfig(format!(
                "episode.gamma must lie in [0, 1], got {}",
                self.episode.gamma
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
