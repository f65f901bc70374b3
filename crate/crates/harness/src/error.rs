use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("missing artifact {} (training of missing artifacts is disabled)", .0.display())]
    MissingArtifact(PathBuf),

    #[error("results store {} holds no cells", .0.display())]
    EmptyStore(PathBuf),

    #[error("no episode records to summarise")]
    EmptyRecords,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] hvac_core::Error),

    #[error(transparent)]
    Nn(#[from] hvac_nn::NnError),

    #[error(transparent)]
    Predictor(#[from] hvac_predictor::PredictorError),

    #[error(transparent)]
    Ppo(#[from] hvac_ppo::PpoError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
