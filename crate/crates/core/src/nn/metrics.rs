// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::model::{CaptureSet, Model};
use crate::data::Dataset;
use crate::error::Result;
use crate::numeric::argmax;
use crate::tensor::Tensor;

/// Class predictions from model outputs: argmax of each row, or for a single
/// output column, 1 when the sigmoid of the logit exceeds 0.5.
pub fn predictions(outputs: &Tensor) -> Vec<usize> {
    let w = outputs.row_len();
    (0..outputs.rows())
        .map(|i| {
            let row = outputs.row(i);
            if w == 1 {
                (row[0] > 0.0) as usize
            } else {
                argmax(row)
            }
        })
        .collect()
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / preds.len() as f64
}

/// Binary confusion counts with class 1 as positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(preds: &[usize], labels: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&p, &l) in preds.iter().zip(labels) {
            match (p == 1, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1_score(preds: &[usize], labels: &[usize]) -> f64 {
    Confusion::new(preds, labels).f1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
}

pub fn predict(model: &Model, data: &Dataset) -> Result<Vec<usize>> {
    Ok(predictions(&model.evaluate(data.inputs(), &mut CaptureSet::none())?))
}

/// Accuracy and positive-class F1 in evaluation mode.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<Metrics> {
    let preds = predict(model, data)?;
    Ok(Metrics {
        accuracy: accuracy(&preds, data.labels()),
        f1: f1_score(&preds, data.labels()),
    })
}
