// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sequential networks on top of [`crate::autodiff`]: layers, losses, AdamW,
//! training, activation capture and patching, checkpoints.

pub mod arch;
pub mod checkpoint;
mod layer;
mod loss;
mod metrics;
mod model;
mod optim;
mod train;


pub use arch::{architectures, Architecture};
pub use layer::{Layer, LayerKind, LayerSpec, BN_EPS, BN_MOMENTUM};
pub use loss::{bce_with_logits, cross_entropy_with_logits, standard_loss};
pub use metrics::{accuracy, evaluate, f1_score, predict, predictions, Confusion, Metrics};
pub use model::{CaptureSet, Mode, Model, EVAL_CHUNK, PRE_SUFFIX};
pub use optim::{AdamW, AdamWConfig};
pub use train::{
    batch_order, train_loop, Batch, EpochRecord, LossSpec, LossTerm, LossValue, Objective, ObjectiveValue,
    StandardLoss, TrainConfig, TrainHistory,
};
