//! Dense f64 tensors with a dynamic reverse-mode tape, the layers used by the occupancy
//! predictor and the policy networks, Adam, finite-difference checks and a binary
//! checkpoint format.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::{NnError, Result};
pub use gradcheck::{check_inputs, check_params, relative_error, GradCheckConfig, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use layers::{Linear, LstmCell, Mlp};
pub use optim::{clip_grad_norm, Adam};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
