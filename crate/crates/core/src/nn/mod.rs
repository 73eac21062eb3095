//! Fully connected ReLU classifier with batch normalization, dropout,
//! softmax output and Adam training.
//!
//! Hidden layer `j` computes `affine → batch-norm → ReLU → dropout`; the
//! output layer is affine followed by softmax over the `k` active-set
//! classes. Weights are stored `fan_in × fan_out` so a batch `X` (rows are
//! samples) maps to `X W + B`.

mod model;
mod optim;
mod train;

pub use model::{
    BatchNorm, Dense, FeatureScaler, ForwardCache, ForwardOutput, Gradients, HiddenGrads,
    HiddenLayer, Masks, MlpModel, Mode,
};
pub use optim::{adam_update, AdamConfig, AdamState};
pub use train::{
    cross_entropy, fit, init_model, predict_topk, rank_classes, train, EpochStats,
    RankedPrediction, Targets, TrainConfig, TrainOutcome, TrainWarning,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("non-finite activation in layer {layer}")]
    NonfiniteActivation { layer: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("K = {k} outside 1..={classes}")]
    KOutOfRange { k: usize, classes: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("model was trained against a different active-set dictionary")]
    BindingMismatch,
}
