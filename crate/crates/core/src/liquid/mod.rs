//! Liquid time-constant networks on Neural Circuit Policy wiring, with the
//! feed-forward, convolutional, and recurrent baselines they are compared against.
//!
//! Everything trainable is recorded on a small reverse-mode [`Tape`]; one tape
//! per sequence keeps gradient computation independent and parallel.

mod adam;
mod checkpoint;
mod model;
mod params;
mod tape;
mod train;
mod wiring;

pub use adam::{adam_step, Adam};
pub use checkpoint::{Checkpoint, Normalizer, CHECKPOINT_FORMAT_VERSION};
pub use model::{cfc_update, fused_update, ArchConfig, Dropout, LiquidModel, LiquidState, ModelKind};
pub use params::{Bound, Param, ParamSet, TensorRecord};
pub use tape::{Gradients, Tape, Var};
pub use train::{fit, mse, sequence_loss, sequence_loss_grad, train, windows, History, TrainConfig};
pub use wiring::{auto_ncp, Layer, NcpWiring, Neuron, Synapse};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LiquidError {
    #[error("invalid sizes: {0}")]
    InvalidSizes(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("hidden state became non-finite")]
    NonFiniteState,
    #[error("tape already consumed by a backward pass")]
    GraphConsumed,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LiquidError> = std::result::Result<T, E>;
