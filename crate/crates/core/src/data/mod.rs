// SPDX-License-Identifier: MIT OR Apache-2.0

//! Datasets: MNIST IDX files, tabular CSV, seeded synthetic stand-ins, and
//! world sampling for analysis.

mod idx;
mod synthetic;
mod tabular;
mod worlds;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::reasons::AttrValue;
use crate::tensor::Tensor;

pub use idx::{load_mnist_idx, read_idx, write_idx, IdxArray};
pub use synthetic::{synthetic_digits, synthetic_fairness};
pub use tabular::{load_tabular_csv, Standardizer, TabularSpec, TabularSplits};
pub use worlds::{sample_worlds, WorldSample};

/// Attribute holding the class label of every example.
pub const LABEL_ATTR: &str = "label";
/// Attribute holding protected-group membership (1 = privileged).
pub const GROUP_ATTR: &str = "group";

/// Inputs stacked along the leading axis, with labels and optional
/// protected-group membership.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    classes: usize,
    privileged: Option<Vec<bool>>,
    split: String,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.rank() < 2 {
            return Err(Error::Shape(format!(
                "dataset inputs need a leading example axis, got {:?}",
                inputs.shape()
            )));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
            privileged: None,
            split: "all".into(),
        })
    }

    pub fn with_privileged(mut self, privileged: Vec<bool>) -> Result<Self> {
        if privileged.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} group flags for {} examples",
                privileged.len(),
                self.len()
            )));
        }
        self.privileged = Some(privileged);
        Ok(self)
    }

    pub fn with_split(mut self, split: impl Into<String>) -> Self {
        self.split = split.into();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    /// Shape of one example.
    pub fn input_shape(&self) -> &[usize] {
        &self.inputs.shape()[1..]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn privileged(&self) -> Option<&[bool]> {
        self.privileged.as_deref()
    }

    pub fn split(&self) -> &str {
        &self.split
    }

    /// Inputs of the given examples, stacked.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        self.inputs.select_rows(indices)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let inputs = self.inputs.select_rows(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Dataset::new(inputs, labels, self.classes)?.with_split(self.split.clone());
        if let Some(p) = &self.privileged {
            out.privileged = Some(indices.iter().map(|&i| p[i]).collect());
        }
        Ok(out)
    }

    /// First `n` examples (or all of them if fewer).
    pub fn head(&self, n: usize) -> Result<Dataset> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Per-example attributes: always `label`, plus `group` when present.
    pub fn attributes(&self) -> BTreeMap<String, Vec<AttrValue>> {
        let mut out = BTreeMap::new();
        out.insert(
            LABEL_ATTR.to_string(),
            self.labels.iter().map(|&l| AttrValue::Int(l as i64)).collect(),
        );
        if let Some(p) = &self.privileged {
            out.insert(GROUP_ATTR.to_string(), p.iter().map(|&b| AttrValue::Int(b as i64)).collect());
        }
        out
    }

    /// Fraction of examples with label 1.
    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.len().max(1) as f64
    }
}
