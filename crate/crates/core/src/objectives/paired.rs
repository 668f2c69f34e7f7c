// SPDX-License-Identifier: MIT OR Apache-2.0

use std::sync::Arc;

use crate::data::Dataset;
use crate::error::Result;
use crate::nn::{train_loop, LossSpec, Model, Objective, TrainConfig, TrainHistory};

/// A model trained with standard loss plus a reasons term, and a copy of
/// the same initial model trained on the identical batch sequence with the
/// standard loss alone.
#[derive(Clone, Debug)]
pub struct PairedRun {
    pub reasons: Model,
    pub comparison: Model,
    pub reasons_history: TrainHistory,
    pub comparison_history: TrainHistory,
}

pub fn paired_training(
    initial: &Model,
    train: &Dataset,
    extra: Arc<dyn Objective>,
    weight: f64,
    cfg: &TrainConfig,
) -> Result<PairedRun> {
    let mut reasons = initial.clone();
    let mut comparison = initial.clone();
    let reasons_history = train_loop(&mut reasons, train, &LossSpec::combined(extra, weight)?, cfg)?;
    let comparison_history = train_loop(&mut comparison, train, &LossSpec::standard(), cfg)?;
    Ok(PairedRun {
        reasons,
        comparison,
        reasons_history,
        comparison_history,
    })
}
