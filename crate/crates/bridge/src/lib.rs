//! Live sessions where a person plays the occupant: the service streams each step
//! and accepts override feedback that replaces the simulated occupant for that step.

pub mod error;
pub mod protocol;
pub mod server;
pub mod session;

pub use error::{BridgeError, Result};
pub use protocol::{
    ClientMessage, Cumulative, Event, EventBody, FeedbackMode, SessionRequest, SessionStatus, StepEvent,
    PROTOCOL_VERSION,
};
pub use server::{serve, ServeConfig, Server};
pub use session::{spawn_session, Session, SessionHandle};
