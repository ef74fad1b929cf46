//! From-scratch 1D convolutional network: tensors, layer kernels, Adam,
//! the training loop and checkpoints.

mod adam;
mod checkpoint;
mod model;
pub mod ops;
mod tensor;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{ModelCheckpoint, NamedArray, CHECKPOINT_FORMAT_VERSION};
pub use model::{build_ser_model, ser_layer_specs, Cache, Layer, LayerSpec, Model, ModelConfig, StepKey, DEFAULT_CONV_FILTERS};
pub use ops::Mode;
pub use tensor::Tensor;
pub use train::{evaluate, train, Classifier, EpochStats, Prediction, TrainingData};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch normalization needs at least 2 samples in training mode, got {0}")]
    DegenerateBatch(usize),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite activations: {0}")]
    NonFinite(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
}
