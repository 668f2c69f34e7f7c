// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ActivationMatrix, NeuronId};
use crate::error::{Error, Result};
use crate::reasons::{strength, Belief, Proposition};

/// Min, mean and max strength of one layer's neurons for one proposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: String,
    pub proposition: String,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Strength of every neuron for every proposition under one belief.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrengthTable {
    pub neurons: Vec<NeuronId>,
    pub propositions: Vec<String>,
    /// `values[u][p]`: strength of neuron `u` for proposition `p`.
    pub values: Vec<Vec<f64>>,
    pub belief: Vec<f64>,
    pub summaries: Vec<LayerSummary>,
}

impl StrengthTable {
    pub fn get(&self, neuron: usize, proposition: usize) -> f64 {
        self.values[neuron][proposition]
    }

    pub fn proposition_index(&self, description: &str) -> Result<usize> {
        self.propositions
            .iter()
            .position(|p| p == description)
            .ok_or_else(|| Error::InvalidArgument(format!("no proposition `{description}` in table")))
    }

    /// Column `proposition` restricted to the neurons of `layer`, as
    /// `(neuron row, strength)` pairs in table order.
    pub fn layer_column(&self, layer: &str, proposition: usize) -> Result<Vec<(usize, f64)>> {
        if proposition >= self.propositions.len() {
            return Err(Error::InvalidArgument(format!("proposition column {proposition} out of range")));
        }
        let out: Vec<(usize, f64)> = (0..self.neurons.len())
            .filter(|&u| self.neurons[u].layer == layer)
            .map(|u| (u, self.values[u][proposition]))
            .collect();
        if out.is_empty() {
            return Err(Error::UnknownLayer(layer.to_string()));
        }
        Ok(out)
    }
}

/// Strength table of every column of `matrix`. Fails if any proposition is
/// trivial under `b`.
pub fn strength_heatmap(matrix: &ActivationMatrix, propositions: &[Proposition], b: &Belief) -> Result<StrengthTable> {
    if b.len() != matrix.n_worlds() {
        return Err(Error::Dimension(format!(
            "belief over {} worlds, matrix over {}",
            b.len(),
            matrix.n_worlds()
        )));
    }
    let values = (0..matrix.n_neurons())
        .into_par_iter()
        .map(|j| {
            let col = matrix.column(j)?;
            propositions.iter().map(|a| strength(&col, a, b)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = propositions.iter().map(Proposition::describe).collect();
    let mut summaries = Vec::new();
    for layer in matrix.layers() {
        let cols = matrix.layer_columns(layer)?;
        for (p, name) in names.iter().enumerate() {
            let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for &j in &cols {
                let v: f64 = values[j][p];
                min = min.min(v);
                max = max.max(v);
                sum += v;
            }
            summaries.push(LayerSummary {
                layer: layer.to_string(),
                proposition: name.clone(),
                min,
                mean: sum / cols.len() as f64,
                max,
            });
        }
    }
    Ok(StrengthTable {
        neurons: matrix.neurons().to_vec(),
        propositions: names,
        values,
        belief: b.probabilities().to_vec(),
        summaries,
    })
}
