use thiserror::Error;

use crate::net::PolicyNet;

pub type Result<T, E = PpoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {what} has {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite loss at update {update}; last good policy retained")]
    Diverged { update: usize, last_good: Box<PolicyNet> },

    #[error("checkpoint is not a PPO policy: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Nn(#[from] hvac_nn::NnError),

    #[error(transparent)]
    Core(#[from] hvac_core::Error),
}

impl From<PpoError> for hvac_core::Error {
    fn from(e: PpoError) -> Self {
        match e {
            PpoError::Core(inner) => inner,
            other => hvac_core::Error::External(other.to_string()),
        }
    }
}
