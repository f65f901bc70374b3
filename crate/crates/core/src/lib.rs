//! Human-in-the-loop HVAC simulation: domain types, trace ingestion, the
//! building environment with occupant overrides, and baseline controllers.

pub mod controllers;
pub mod domain;
pub mod env;
pub mod error;
pub mod ingest;

pub use error::{Error, Result};
