//! Occupancy forecaster: a bidirectional LSTM encodes the past occupancy window into a
//! context vector, a second bidirectional LSTM runs over the future time features joined
//! with that context, and a sigmoid head emits one probability per future step.

pub mod error;
pub mod model;
pub mod train;
pub mod windows;

pub use error::{PredictorError, Result};
pub use model::{accuracy, PredictorConfig, PredictorModel, PredictorNet, CHECKPOINT_KIND};
pub use train::{mean_loss, train, train_with, TrainReport};
pub use windows::{build_training_windows, square_wave, future_features, past_features, FutureStep, PastStep, Window};
