// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation patching: choosing neurons by strength, rewriting their
//! activations mid-forward, and the pos2neg / neg2pos experiments.

mod experiment;
mod rule;

use std::collections::BTreeMap;

use crate::analysis::{ActivationMatrix, NeuronId, StrengthTable};
use crate::error::{Error, Result};
use crate::nn::{CaptureSet, Model};
use crate::tensor::Tensor;

pub use experiment::{
    neg2pos_experiment, pos2neg_experiment, InterventionContext, InterventionRecord, InterventionReport, Protocol,
};
pub use rule::{Direction, PatchRule};

/// Floor applied to the patched distribution before renormalizing.
pub const KL_FLOOR: f64 = 1e-12;

/// The `count` neurons of `layer` with the highest (`For`) or lowest
/// (`Against`) strength for column `proposition`; ties go to the lower
/// neuron index.
pub fn select_neurons(
    table: &StrengthTable,
    layer: &str,
    proposition: usize,
    count: usize,
    direction: Direction,
) -> Result<Vec<NeuronId>> {
    let mut col = table.layer_column(layer, proposition)?;
    if count > col.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {count} neurons from layer `{layer}` of {}",
            col.len()
        )));
    }
    col.sort_by(|&(u, a), &(v, b)| {
        let by_strength = match direction {
            Direction::For => b.total_cmp(&a),
            Direction::Against => a.total_cmp(&b),
        };
        by_strength.then(table.neurons[u].index.cmp(&table.neurons[v].index))
    });
    Ok(col.into_iter().take(count).map(|(u, _)| table.neurons[u].clone()).collect())
}

/// Mean of each listed neuron's column over the matrix's worlds.
pub fn neuron_means(matrix: &ActivationMatrix, neurons: &[NeuronId]) -> Result<BTreeMap<NeuronId, f64>> {
    let n = matrix.n_worlds() as f64;
    neurons
        .iter()
        .map(|id| {
            let j = matrix.neuron_index(id)?;
            let sum: f64 = (0..matrix.n_worlds()).map(|i| matrix.get(i, j)).sum();
            Ok((id.clone(), sum / n))
        })
        .collect()
}

/// Evaluation-mode outputs with the listed neurons of `layer` rewritten.
/// An empty assignment list is a plain forward pass.
pub fn patched_forward(
    model: &Model,
    inputs: &Tensor,
    layer: &str,
    assignments: &[(NeuronId, PatchRule)],
    means: &BTreeMap<NeuronId, f64>,
) -> Result<Tensor> {
    let width = model.capture_width(layer)?;
    let mut plan = Vec::with_capacity(assignments.len());
    for (id, rule) in assignments {
        if id.layer != layer || id.index >= width {
            return Err(Error::UnknownNeuron(format!("{id} in layer `{layer}` of width {width}")));
        }
        let mean = *means
            .get(id)
            .ok_or_else(|| Error::UnknownNeuron(format!("{id} has no reference mean")))?;
        plan.push((id.index, *rule, mean));
    }
    if plan.is_empty() {
        return model.evaluate(inputs, &mut CaptureSet::none());
    }
    let patch = move |t: &mut Tensor| -> Result<()> {
        let rows = t.rows();
        let data = t.data_mut();
        for r in 0..rows {
            for &(j, rule, mean) in &plan {
                let a = &mut data[r * width + j];
                *a = rule.apply(mean, *a);
            }
        }
        Ok(())
    };
    model.forward_patched(inputs, layer, &patch)
}

/// `KL(p ‖ q) = Σ p_i ln(p_i / q_i)`, with `q` floored at [`KL_FLOOR`] and
/// renormalized; zero-probability terms of `p` contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    let floored: Vec<f64> = q.iter().map(|&v| v.max(KL_FLOOR)).collect();
    let z: f64 = floored.iter().sum();
    let kl: f64 = p
        .iter()
        .zip(&floored)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / (qi / z)).ln())
        .sum();
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests;
