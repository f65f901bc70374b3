use std::net::SocketAddr;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = BridgeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("unknown session {0:?}")]
    UnknownSession(String),

    #[error("session {0} has finished its episode")]
    SessionFinished(String),

    #[error("invalid session request: {0}")]
    InvalidRequest(String),

    #[error("session task stopped")]
    Closed,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] hvac_core::Error),

    #[error(transparent)]
    Harness(#[from] hvac_harness::HarnessError),

    #[error(transparent)]
    Nn(#[from] hvac_nn::NnError),

    #[error(transparent)]
    Predictor(#[from] hvac_predictor::PredictorError),

    #[error(transparent)]
    Ppo(#[from] hvac_ppo::PpoError),
}
