//! PPO for the binary thermostat: rollout collection over parallel environments,
//! generalised advantage estimation, the clipped surrogate with value and entropy terms,
//! and minibatch Adam updates.

pub mod config;
pub mod error;
pub mod gae;
pub mod loss;
pub mod net;
pub mod normalize;
pub mod policy;
pub mod rollout;
pub mod train;

pub use config::{NormalizationMode, PpoConfig};
pub use error::{PpoError, Result};
pub use gae::{gae, normalize_advantages};
pub use loss::{ppo_losses, LossVars, Minibatch};
pub use net::{PolicyNet, CHECKPOINT_KIND};
pub use normalize::ObsNormalizer;
pub use policy::{ActMode, RlPolicy};
pub use rollout::{HvacTrainEnv, RolloutBuffer, RolloutEnv, Transition, VecEnv};
pub use train::{minibatch, ppo_update, ratios, train, TrainOutcome, UpdateStats};
