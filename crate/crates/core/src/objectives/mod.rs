// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reasons-based training objectives, adversarial robustness, fairness
//! metrics, and paired training against a standard-loss copy.

mod fairness;
mod fgsm;
mod losses;
mod paired;
mod strength;

use std::sync::Arc;

use crate::error::Result;
use crate::nn::{LossSpec, LossTerm, Objective, StandardLoss};
use crate::registry::Registry;

pub use fairness::{disparate_impact, equality_of_opportunity, reasons_difference, FairnessRow};
pub use fgsm::{fgsm_attack, robustness_curve, RobustnessPoint};
pub use losses::{
    doxastic_loss, elementary_loss, reasons_difference_loss, DoxasticLoss, ElementaryLoss,
    ReasonsDifferenceLoss, COSINE_FLOOR,
};
pub use paired::{paired_training, PairedRun};
pub use strength::graph_strength;

pub type ObjectiveCtor = dyn Fn() -> Arc<dyn Objective> + Send + Sync;

/// `standard`, `doxastic`, `elementary`, `reasons_difference`.
pub fn objectives() -> Registry<ObjectiveCtor> {
    let mut r: Registry<ObjectiveCtor> = Registry::new("objective");
    r.register("standard", Box::new(|| Arc::new(StandardLoss) as Arc<dyn Objective>))
        .register("doxastic", Box::new(|| Arc::new(DoxasticLoss) as Arc<dyn Objective>))
        .register("elementary", Box::new(|| Arc::new(ElementaryLoss) as Arc<dyn Objective>))
        .register(
            "reasons_difference",
            Box::new(|| Arc::new(ReasonsDifferenceLoss) as Arc<dyn Objective>),
        );
    r
}

pub fn objective(name: &str) -> Result<Arc<dyn Objective>> {
    Ok(objectives().get(name)?())
}

/// Loss spec from `(name, weight)` pairs.
pub fn loss_spec(terms: &[(&str, f64)]) -> Result<LossSpec> {
    let terms = terms
        .iter()
        .map(|&(name, weight)| Ok(LossTerm { weight, objective: objective(name)? }))
        .collect::<Result<Vec<_>>>()?;
    LossSpec::new(terms)
}
