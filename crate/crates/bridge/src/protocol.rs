//! Wire types. Every message in either direction carries `version`.
//! Events travel as one JSON object per line; see `PROTOCOL.md` for the field list.

use hvac_core::domain::{Feedback, ScenarioId};
use hvac_core::env::{FeedbackOrigin, StepRecord};
use hvac_harness::{ControllerKind, DataSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{BridgeError, Result};

pub const PROTOCOL_VERSION: u32 = 1;

/// Where feedback comes from when no person has spoken during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Silence means no override.
    #[default]
    Manual,
    /// Silence falls back to the simulated occupant.
    Hybrid,
}

fn default_beta() -> f64 {
    0.5
}

fn default_p_max() -> f64 {
    1.0
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub version: u32,
    pub scenario: ScenarioId,
    pub controller: ControllerKind,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub seed: u64,
    /// Test day to play, 0-based.
    #[serde(default)]
    pub day: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default)]
    pub mode: FeedbackMode,
    /// Policy checkpoint, required for the `hitl` controller.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Occupancy predictor checkpoint, required for scenario S4.
    #[serde(default)]
    pub predictor: Option<PathBuf>,
    /// Auto-advance rate; absent means manual stepping.
    #[serde(default)]
    pub steps_per_second: Option<f64>,
}

impl SessionRequest {
    pub fn new(scenario: ScenarioId, controller: ControllerKind) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            scenario,
            controller,
            data: DataSpec::default(),
            seed: 0,
            day: 0,
            beta: default_beta(),
            p_max: default_p_max(),
            mode: FeedbackMode::Manual,
            checkpoint: None,
            predictor: None,
            steps_per_second: None,
        }
    }
}

/// Client-to-service messages, over the socket or as request bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// Override for the current step: -1 off, 0 comfortable, +1 on.
    Feedback { version: u32, value: i64 },
    Step {
        version: u32,
        #[serde(default = "one")]
        count: usize,
    },
    Pace {
        version: u32,
        steps_per_second: Option<f64>,
    },
    /// Highest step index the client has fully processed.
    Ack { version: u32, step: usize },
}

fn one() -> usize {
    1
}

impl ClientMessage {
    pub fn version(&self) -> u32 {
        match self {
            ClientMessage::Feedback { version, .. }
            | ClientMessage::Step { version, .. }
            | ClientMessage::Pace { version, .. }
            | ClientMessage::Ack { version, .. } => *version,
        }
    }

    pub fn parse(line: &str) -> Result<Self> {
        let msg: Self = serde_json::from_str(line).map_err(|e| BridgeError::Protocol(e.to_string()))?;
        check_version(msg.version())?;
        Ok(msg)
    }
}

pub fn check_version(v: u32) -> Result<()> {
    if v != PROTOCOL_VERSION {
        return Err(BridgeError::Protocol(format!("version {v} unsupported, expected {PROTOCOL_VERSION}")));
    }
    Ok(())
}

/// Decode a raw feedback value. Anything outside {-1, 0, +1} is a protocol error.
pub fn parse_feedback(value: i64) -> Result<Feedback> {
    Feedback::try_from(value).map_err(BridgeError::Protocol)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cumulative {
    pub discomfort: f64,
    pub energy: f64,
    pub total: f64,
}

/// Payload of a `step` event: the episode record line plus session context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    #[serde(flatten)]
    pub record: StepRecord,
    pub feedback_origin: FeedbackOrigin,
    pub cumulative: Cumulative,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    Step(StepEvent),
    /// Feedback discarded because nobody is home during `step`; f_t was 0.
    Rejected {
        step: usize,
        feedback: Feedback,
        reason: String,
    },
    Finished { step: usize },
    /// Reply to a feedback message; later messages in the same step replace it.
    FeedbackQueued {
        step: usize,
        feedback: Feedback,
        replaced: Option<Feedback>,
    },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub version: u32,
    pub session: String,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn new(session: &str, body: EventBody) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            session: session.to_string(),
            body,
        }
    }

    /// Step the event refers to, if any.
    pub fn step(&self) -> Option<usize> {
        match &self.body {
            EventBody::Step(s) => Some(s.record.step),
            EventBody::Rejected { step, .. }
            | EventBody::Finished { step }
            | EventBody::FeedbackQueued { step, .. } => Some(*step),
            EventBody::Error { .. } => None,
        }
    }

    /// One line of the event stream, newline included.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("events serialize");
        s.push('\n');
        s
    }
}

/// Body of `GET /sessions/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub version: u32,
    pub session: String,
    pub scenario: ScenarioId,
    pub controller: ControllerKind,
    pub mode: FeedbackMode,
    pub beta: f64,
    /// Next step to be played.
    pub step: usize,
    pub episode_len: usize,
    pub done: bool,
    pub occupied_now: Option<bool>,
    pub pending_feedback: Option<Feedback>,
    pub steps_per_second: Option<f64>,
    pub clients: usize,
    pub last_acked: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use hvac_core::domain::Action;

    #[test]
    fn step_event_round_trips_with_record_fields() {
        let record = StepRecord {
            step: 3,
            clock_index: 40,
            t_in: 21.25,
            t_out: 7.5,
            rho: -0.02,
            occupied: true,
            action: Action::Off,
            feedback: Feedback::TurnOn,
            controlled_action: Action::On,
            discomfort: 1.6,
            energy: 0.1,
            total: 0.85,
            reward: -0.85,
            next_t_in: 21.4,
        };
        let ev = Event::new(
            "s1",
            EventBody::Step(StepEvent {
                record,
                feedback_origin: FeedbackOrigin::Human,
                cumulative: Cumulative::default(),
                done: false,
            }),
        );
        let line = ev.to_line();
        assert!(line.ends_with('\n') && !line.trim_end().contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["type"], "step");
        assert_eq!(v["version"], PROTOCOL_VERSION);
        assert_eq!(v["feedback"], 1);
        assert_eq!(v["feedback_origin"], "human");
        let record_json = serde_json::to_value(record).unwrap();
        for (k, val) in record_json.as_object().unwrap() {
            assert_eq!(&v[k], val, "field {k}");
        }
        assert_eq!(serde_json::from_str::<Event>(&line).unwrap(), ev);
    }

    #[test]
    fn client_messages_need_current_version() {
        let ok = ClientMessage::parse(r#"{"type":"feedback","version":1,"value":-1}"#).unwrap();
        assert_eq!(ok, ClientMessage::Feedback { version: 1, value: -1 });
        assert_eq!(ClientMessage::parse(r#"{"type":"step","version":1}"#).unwrap(), ClientMessage::Step { version: 1, count: 1 });
        assert!(matches!(ClientMessage::parse(r#"{"type":"step","version":2}"#), Err(BridgeError::Protocol(_))));
        assert!(matches!(ClientMessage::parse(r#"{"type":"step"}"#), Err(BridgeError::Protocol(_))));
        assert!(matches!(ClientMessage::parse("not json"), Err(BridgeError::Protocol(_))));
    }

    #[test]
    fn feedback_outside_range_is_protocol_error() {
        assert_eq!(parse_feedback(1).unwrap(), Feedback::TurnOn);
        assert_eq!(parse_feedback(0).unwrap(), Feedback::None);
        assert!(matches!(parse_feedback(2), Err(BridgeError::Protocol(_))));
        assert!(matches!(parse_feedback(-7), Err(BridgeError::Protocol(_))));
    }
}
