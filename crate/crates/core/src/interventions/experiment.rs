// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{kl_divergence, neuron_means, patched_forward, select_neurons, Direction, PatchRule};
use crate::analysis::{class_propositions, strength_heatmap, ActivationMatrix, NeuronId, StrengthTable};
use crate::data::{Dataset, WorldSample, LABEL_ATTR};
use crate::error::{Error, Result};
use crate::nn::{CaptureSet, Model};
use crate::numeric::{argmax, softmax};
use crate::reasons::Belief;

/// Strengths and reference means for one layer, computed from one world
/// sample under the uniform belief.
#[derive(Clone, Debug, PartialEq)]
pub struct InterventionContext {
    pub layer: String,
    /// Column `d` is the proposition "label = d".
    pub table: StrengthTable,
    pub means: BTreeMap<NeuronId, f64>,
    pub sample_seed: u64,
}

impl InterventionContext {
    pub fn build(model: &Model, sample: &WorldSample, layer: &str, classes: usize) -> Result<Self> {
        let matrix = ActivationMatrix::build(model, sample, &[layer])?;
        let props = class_propositions(&sample.worlds, LABEL_ATTR, classes)?;
        let table = strength_heatmap(&matrix, &props, &Belief::uniform(matrix.n_worlds()))?;
        let means = neuron_means(&matrix, matrix.neurons())?;
        Ok(Self {
            layer: layer.to_string(),
            table,
            means,
            sample_seed: sample.seed,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Inputs labelled and predicted `d`; patch neurons against `d`; success
    /// when the prediction leaves `d`.
    Pos2neg,
    /// Inputs not labelled `d`; patch neurons for `d`; success when the
    /// prediction becomes `d`.
    Neg2pos,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Pos2neg => "pos2neg",
            Protocol::Neg2pos => "neg2pos",
        })
    }
}

impl Protocol {
    fn success(self, class: usize, patched_prediction: usize) -> bool {
        match self {
            Protocol::Pos2neg => patched_prediction != class,
            Protocol::Neg2pos => patched_prediction == class,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    /// Row in the evaluated dataset.
    pub index: usize,
    pub label: usize,
    pub original_prediction: usize,
    pub patched_prediction: usize,
    pub success: bool,
    /// `KL(original ‖ patched)` over softmax class probabilities.
    pub kl: f64,
    pub original_logits: Vec<f64>,
    pub patched_logits: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub protocol: Protocol,
    pub class: usize,
    pub layer: String,
    pub rule: PatchRule,
    pub neurons: Vec<NeuronId>,
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_kl: f64,
    pub median_kl: f64,
    /// Seed of the world sample the strengths and reference means came from.
    pub reference_sample_seed: u64,
    pub records: Vec<InterventionRecord>,
}

impl InterventionReport {
    /// Whether every stored success flag agrees with its stored logits.
    pub fn flags_consistent(&self) -> bool {
        self.records.iter().all(|r| {
            r.original_prediction == argmax(&r.original_logits)
                && r.patched_prediction == argmax(&r.patched_logits)
                && r.success == self.protocol.success(self.class, r.patched_prediction)
        })
    }
}

fn run(
    protocol: Protocol,
    model: &Model,
    data: &Dataset,
    ctx: &InterventionContext,
    class: usize,
    count: usize,
    rule: PatchRule,
) -> Result<InterventionReport> {
    if class >= data.classes() || model.output_width() < 2 {
        return Err(Error::InvalidArgument(format!(
            "class {class} with {} classes and {} model outputs",
            data.classes(),
            model.output_width()
        )));
    }
    let outputs = model.evaluate(data.inputs(), &mut CaptureSet::none())?;
    let labels = data.labels();
    let chosen: Vec<usize> = (0..data.len())
        .filter(|&i| match protocol {
            Protocol::Pos2neg => labels[i] == class && argmax(outputs.row(i)) == class,
            Protocol::Neg2pos => labels[i] != class,
        })
        .collect();
    if chosen.is_empty() {
        return Err(Error::NoQualifyingInputs(format!("{protocol} for class {class}")));
    }
    let direction = match protocol {
        Protocol::Pos2neg => Direction::Against,
        Protocol::Neg2pos => Direction::For,
    };
    let neurons = select_neurons(&ctx.table, &ctx.layer, class, count, direction)?;
    let assignments: Vec<(NeuronId, PatchRule)> = neurons.iter().map(|n| (n.clone(), rule)).collect();
    let inputs = data.batch(&chosen)?;
    let patched = patched_forward(model, &inputs, &ctx.layer, &assignments, &ctx.means)?;
    let records = chosen
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let original_logits = outputs.row(i).to_vec();
            let patched_logits = patched.row(r).to_vec();
            let patched_prediction = argmax(&patched_logits);
            Ok(InterventionRecord {
                index: i,
                label: labels[i],
                original_prediction: argmax(&original_logits),
                patched_prediction,
                success: protocol.success(class, patched_prediction),
                kl: kl_divergence(&softmax(&original_logits), &softmax(&patched_logits))?,
                original_logits,
                patched_logits,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let attempts = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let mut kls: Vec<f64> = records.iter().map(|r| r.kl).collect();
    kls.sort_by(f64::total_cmp);
    let median_kl = if attempts % 2 == 1 {
        kls[attempts / 2]
    } else {
        0.5 * (kls[attempts / 2 - 1] + kls[attempts / 2])
    };
    Ok(InterventionReport {
        protocol,
        class,
        layer: ctx.layer.clone(),
        rule,
        neurons,
        attempts,
        successes,
        success_rate: successes as f64 / attempts as f64,
        mean_kl: kls.iter().sum::<f64>() / attempts as f64,
        median_kl,
        reference_sample_seed: ctx.sample_seed,
        records,
    })
}

pub fn pos2neg_experiment(
    model: &Model,
    data: &Dataset,
    ctx: &InterventionContext,
    class: usize,
    count: usize,
    rule: PatchRule,
) -> Result<InterventionReport> {
    run(Protocol::Pos2neg, model, data, ctx, class, count, rule)
}

pub fn neg2pos_experiment(
    model: &Model,
    data: &Dataset,
    ctx: &InterventionContext,
    class: usize,
    count: usize,
    rule: PatchRule,
) -> Result<InterventionReport> {
    run(Protocol::Neg2pos, model, data, ctx, class, count, rule)
}
