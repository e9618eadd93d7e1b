//! Minimal double-precision neural stack with hand-derived gradients.

mod adam;
mod checkpoint;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod lstm;
mod model;
mod tensor;

use thiserror::Error;

use crate::codec::CodecError;

pub use adam::{adam_step, clip_grad_norm, Adam, AdamConfig, LrGroups};
pub use checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dense::{Activation, Dense, DenseCache};
pub use dropout::{Dropout, Mode};
pub use gradcheck::{grad_check, GradCheckReport, GRAD_CHECK_SUBSAMPLE};
pub use loss::{
    batch_loss, head_loss, loss_nll, loss_regression, loss_sine, softmax, LossEval, DEGENERATE_LOSS,
};
pub use lstm::{LstmCache, LstmLayer, LstmLayerSpec, FORGET_BIAS_INIT};
pub use model::{stack_windows, ForwardCache, HeadKind, HeadSpec, Model, ModelKind, ModelSpec};
pub use tensor::{ParamGroup, Parameter, Tensor};

pub(crate) use model::parse_smoothing;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{context}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("finite-difference epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
