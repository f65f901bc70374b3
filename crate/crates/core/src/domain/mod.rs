//! Shared value types, configuration, and seeded random streams.

pub mod config;
pub mod rng;
mod types;

pub use config::SimConfig;
pub use rng::{seed_from_env, substream, RunRng, Substream};
pub use types::*;
