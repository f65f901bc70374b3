use thiserror::Error;

pub type Result<T, E = PredictorError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid predictor config: {0}")]
    InvalidConfig(String),

    #[error("series too short: need more than {required} steps, got {available}")]
    SeriesTooShort { required: usize, available: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint is not an occupancy predictor: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Nn(#[from] hvac_nn::NnError),

    #[error(transparent)]
    Core(#[from] hvac_core::Error),
}

impl From<PredictorError> for hvac_core::Error {
    fn from(e: PredictorError) -> Self {
        match e {
            PredictorError::Core(inner) => inner,
            other => hvac_core::Error::External(other.to_string()),
        }
    }
}
