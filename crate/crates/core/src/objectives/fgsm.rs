// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{accuracy, predictions, standard_loss, CaptureSet, Model, EVAL_CHUNK};
use crate::tensor::Tensor;

/// `clamp(x + ε·sign(∇ₓ loss), 0, 1)` with the standard loss, sign(0) = 0.
/// Rows are attacked in independent chunks; because the loss is a batch
/// mean, each row's perturbation depends only on that row.
pub fn fgsm_attack(model: &Model, inputs: &Tensor, labels: &[usize], epsilon: f64) -> Result<Tensor> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be finite and ≥ 0")));
    }
    if inputs.rows() != labels.len() {
        return Err(Error::Dimension(format!("{} inputs, {} labels", inputs.rows(), labels.len())));
    }
    let n = inputs.rows();
    let starts: Vec<usize> = (0..n).step_by(EVAL_CHUNK).collect();
    let parts = starts
        .par_iter()
        .map(|&s| {
            let e = (s + EVAL_CHUNK).min(n);
            let x = inputs.slice_rows(s, e)?;
            let y = &labels[s..e];
            let (_, grad) = model.input_gradient(&x, &|g, out| standard_loss(g, out, y))?;
            let data = x
                .data()
                .iter()
                .zip(grad.data())
                .map(|(&v, &d)| {
                    let step = if d > 0.0 {
                        epsilon
                    } else if d < 0.0 {
                        -epsilon
                    } else {
                        0.0
                    };
                    (v + step).clamp(0.0, 1.0)
                })
                .collect();
            Tensor::new(x.shape().to_vec(), data)
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat_rows(&parts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub epsilon: f64,
    pub accuracy: f64,
}

/// Accuracy on FGSM-perturbed inputs for each ε.
pub fn robustness_curve(model: &Model, data: &Dataset, epsilons: &[f64]) -> Result<Vec<RobustnessPoint>> {
    epsilons
        .iter()
        .map(|&epsilon| {
            let adv = if epsilon == 0.0 {
                data.inputs().clone()
            } else {
                fgsm_attack(model, data.inputs(), data.labels(), epsilon)?
            };
            let preds = predictions(&model.evaluate(&adv, &mut CaptureSet::none())?);
            Ok(RobustnessPoint {
                epsilon,
                accuracy: accuracy(&preds, data.labels()),
            })
        })
        .collect()
}
