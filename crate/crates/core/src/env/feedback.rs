//! Where per-step override feedback comes from.

use serde::{Deserialize, Serialize};

use super::dynamics::simulate_feedback;
use crate::domain::{Action, ComfortModel, Feedback, RunRng};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackOrigin {
    Simulated,
    Human,
    None,
}

/// What a source sees when asked for this step's override.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackContext {
    pub episode_step: usize,
    pub t_in: f64,
    pub t_out: f64,
    pub action: Action,
    pub occupied: bool,
    pub comfort: ComfortModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackDecision {
    pub value: Feedback,
    pub origin: FeedbackOrigin,
}

impl FeedbackDecision {
    pub fn none() -> Self {
        Self {
            value: Feedback::None,
            origin: FeedbackOrigin::None,
        }
    }
}

/// A provider of override feedback. The environment applies the occupancy
/// gate afterwards, so sources need not check it.
pub trait FeedbackSource {
    fn feedback(&mut self, ctx: &FeedbackContext) -> Result<FeedbackDecision>;
}

/// The probabilistic occupant model.
#[derive(Debug, Clone)]
pub struct SimulatedFeedback {
    rng: RunRng,
}

impl SimulatedFeedback {
    pub fn new(rng: RunRng) -> Self {
        Self { rng }
    }
}

impl FeedbackSource for SimulatedFeedback {
    fn feedback(&mut self, ctx: &FeedbackContext) -> Result<FeedbackDecision> {
        let value = simulate_feedback(
            ctx.t_in,
            ctx.t_out,
            ctx.action,
            ctx.occupied,
            &ctx.comfort,
            &mut self.rng,
        );
        Ok(FeedbackDecision {
            value,
            origin: FeedbackOrigin::Simulated,
        })
    }
}

/// Replays a fixed per-step script as human input. Steps past the end of the
/// script yield no feedback.
#[derive(Debug, Clone)]
pub struct ScriptedFeedback {
    script: Vec<Feedback>,
}

impl ScriptedFeedback {
    pub fn new(script: Vec<Feedback>) -> Self {
        Self { script }
    }
}

impl FeedbackSource for ScriptedFeedback {
    fn feedback(&mut self, ctx: &FeedbackContext) -> Result<FeedbackDecision> {
        Ok(match self.script.get(ctx.episode_step) {
            Some(&value) if value.is_override() => FeedbackDecision {
                value,
                origin: FeedbackOrigin::Human,
            },
            _ => FeedbackDecision::none(),
        })
    }
}

/// Occupants never override.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoFeedback;

impl FeedbackSource for NoFeedback {
    fn feedback(&mut self, _ctx: &FeedbackContext) -> Result<FeedbackDecision> {
        Ok(FeedbackDecision::none())
    }
}
