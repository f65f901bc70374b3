use crate::domain::{Action, ComfortModel, HvacMode, RunRng};
use crate::env::{DecisionContext, Policy};
use crate::error::Result;

/// Hysteresis half-width around the setpoint, degC.
pub const DEFAULT_DEADBAND_DEGC: f64 = 0.5;

/// Occupancy-gated bang-bang thermostat. Inside the deadband the previous
/// command is held.
pub fn rule_based_act(
    occupied: bool,
    t_in: f64,
    comfort: &ComfortModel,
    mode: HvacMode,
    previous: Action,
    deadband: f64,
) -> Action {
    if !occupied {
        return Action::Off;
    }
    let below = t_in < comfort.t_set_degc - deadband;
    let above = t_in > comfort.t_set_degc + deadband;
    match mode {
        HvacMode::Heating if below => Action::On,
        HvacMode::Heating if above => Action::Off,
        HvacMode::Cooling if above => Action::On,
        HvacMode::Cooling if below => Action::Off,
        _ => previous,
    }
}

#[derive(Debug, Clone)]
pub struct RuleBasedController {
    deadband: f64,
    last: Action,
}

impl RuleBasedController {
    pub fn new(deadband: f64) -> Self {
        Self {
            deadband,
            last: Action::Off,
        }
    }
}

impl Default for RuleBasedController {
    fn default() -> Self {
        Self::new(DEFAULT_DEADBAND_DEGC)
    }
}

impl Policy for RuleBasedController {
    fn name(&self) -> &str {
        "rule"
    }

    fn reset(&mut self) {
        self.last = Action::Off;
    }

    fn act(&mut self, ctx: &DecisionContext<'_>, _rng: &mut RunRng) -> Result<Action> {
        let v = &ctx.view;
        self.last = rule_based_act(
            v.occupied(),
            v.t_in,
            &v.comfort,
            v.thermal.mode,
            self.last,
            self.deadband,
        );
        Ok(self.last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let c = ComfortModel::default();
        let h = HvacMode::Heating;
        for prev in [Action::Off, Action::On] {
            assert_eq!(rule_based_act(false, 10.0, &c, h, prev, 0.5), Action::Off);
            assert_eq!(rule_based_act(true, 20.0, &c, h, prev, 0.5), Action::On);
            assert_eq!(rule_based_act(true, 23.0, &c, h, prev, 0.5), Action::Off);
            assert_eq!(rule_based_act(true, 22.2, &c, h, prev, 0.5), prev);
        }
        let cool = HvacMode::Cooling;
        assert_eq!(rule_based_act(true, 23.0, &c, cool, Action::Off, 0.5), Action::On);
        assert_eq!(rule_based_act(true, 21.0, &c, cool, Action::On, 0.5), Action::Off);
    }
}
