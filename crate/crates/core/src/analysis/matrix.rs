// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::WorldSample;
use crate::error::{Error, Result};
use crate::nn::{CaptureSet, Mode, Model};
use crate::reasons::{AttrValue, Proposition, ReasonVector, WorldSet};
use crate::tensor::Tensor;

/// A neuron: layer name plus flat index into that layer's per-example output.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: String,
    pub index: usize,
}

impl NeuronId {
    pub fn new(layer: impl Into<String>, index: usize) -> Self {
        Self {
            layer: layer.into(),
            index,
        }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.layer, self.index)
    }
}

/// Worlds × neurons table of activations. Column `j` is neuron `j`'s reason
/// vector; row `i` is world `i`'s reasons-character.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    worlds: WorldSet,
    neurons: Vec<NeuronId>,
    values: Tensor,
}

impl ActivationMatrix {
    pub fn new(worlds: WorldSet, neurons: Vec<NeuronId>, values: Tensor) -> Result<Self> {
        let (rows, cols) = values.dims2()?;
        if rows != worlds.len() || cols != neurons.len() {
            return Err(Error::Dimension(format!(
                "{rows}×{cols} values for {} worlds and {} neurons",
                worlds.len(),
                neurons.len()
            )));
        }
        if !values.all_finite() {
            return Err(Error::InvalidReason("activation matrix has non-finite entries".into()));
        }
        Ok(Self {
            worlds,
            neurons,
            values,
        })
    }

    /// One evaluation-mode pass over the sample capturing every named layer.
    /// Columns run over layers in the order given, then flat index.
    pub fn build(model: &Model, sample: &WorldSample, layers: &[&str]) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("no layers requested".into()));
        }
        if model.mode() != Mode::Eval {
            return Err(Error::InvalidArgument("activation matrices need an eval-mode model".into()));
        }
        for &l in layers {
            model.capture_end(l)?;
        }
        let mut capture = CaptureSet::new(layers.iter().copied());
        model.evaluate(&sample.inputs, &mut capture)?;
        let n = sample.worlds.len();
        let mut parts = Vec::with_capacity(layers.len());
        let mut neurons = Vec::new();
        for &l in layers {
            let t = capture
                .take(l)
                .ok_or_else(|| Error::UnknownLayer(l.to_string()))?;
            let w = t.row_len();
            neurons.extend((0..w).map(|i| NeuronId::new(l, i)));
            parts.push(t.into_reshaped(&[n, w])?);
        }
        let total = neurons.len();
        let mut values = vec![0.0; n * total];
        for i in 0..n {
            let mut at = i * total;
            for p in &parts {
                let row = p.row(i);
                values[at..at + row.len()].copy_from_slice(row);
                at += row.len();
            }
        }
        Self::new(sample.worlds.clone(), neurons, Tensor::new(vec![n, total], values)?)
    }

    pub fn worlds(&self) -> &WorldSet {
        &self.worlds
    }

    pub fn neurons(&self) -> &[NeuronId] {
        &self.neurons
    }

    /// The underlying `[worlds, neurons]` tensor.
    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn n_worlds(&self) -> usize {
        self.worlds.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn get(&self, world: usize, neuron: usize) -> f64 {
        self.values.data()[world * self.neurons.len() + neuron]
    }

    pub fn column(&self, j: usize) -> Result<ReasonVector> {
        if j >= self.neurons.len() {
            return Err(Error::UnknownNeuron(format!("column {j} of {}", self.neurons.len())));
        }
        ReasonVector::new((0..self.n_worlds()).map(|i| self.get(i, j)).collect())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn neuron_index(&self, id: &NeuronId) -> Result<usize> {
        self.neurons
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| Error::UnknownNeuron(id.to_string()))
    }

    /// Layer names in column order.
    pub fn layers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for n in &self.neurons {
            if out.last() != Some(&n.layer.as_str()) {
                out.push(&n.layer);
            }
        }
        out
    }

    /// Column indices belonging to `layer`.
    pub fn layer_columns(&self, layer: &str) -> Result<Vec<usize>> {
        let cols: Vec<usize> = (0..self.neurons.len())
            .filter(|&j| self.neurons[j].layer == layer)
            .collect();
        if cols.is_empty() {
            return Err(Error::UnknownLayer(layer.to_string()));
        }
        Ok(cols)
    }

    /// The sub-matrix of one layer's columns.
    pub fn layer(&self, layer: &str) -> Result<ActivationMatrix> {
        let cols = self.layer_columns(layer)?;
        let n = self.n_worlds();
        let mut values = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Self::new(
            self.worlds.clone(),
            cols.iter().map(|&j| self.neurons[j].clone()).collect(),
            Tensor::new(vec![n, cols.len()], values)?,
        )
    }

    /// Label proposition over this matrix's worlds.
    pub fn proposition(&self, attribute: &str, value: &AttrValue) -> Result<Proposition> {
        label_proposition(&self.worlds, attribute, value)
    }
}

/// `{w : attribute(w) = value}`.
pub fn label_proposition(worlds: &WorldSet, attribute: &str, value: &AttrValue) -> Result<Proposition> {
    worlds.label_proposition(attribute, value)
}

/// `A_0 … A_{classes-1}` for an integer label attribute.
pub fn class_propositions(worlds: &WorldSet, attribute: &str, classes: usize) -> Result<Vec<Proposition>> {
    (0..classes)
        .map(|d| label_proposition(worlds, attribute, &AttrValue::Int(d as i64)))
        .collect()
}
