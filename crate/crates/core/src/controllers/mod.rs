//! Baseline controllers: an occupancy-gated thermostat and a perfect-forecast
//! rolling-horizon optimiser.

mod mpc;
mod rule;

pub use crate::env::{DecisionContext, Policy};
pub use mpc::{mpc_act, mpc_plan, MpcConfig, MpcController, MpcPlan, MpcWindow};
pub use rule::{rule_based_act, RuleBasedController, DEFAULT_DEADBAND_DEGC};
