// SPDX-License-Identifier: MIT OR Apache-2.0

//! Standard classification losses, recorded on a [`Graph`].

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean cross entropy of `N × C` logits against class indices, through
/// log-softmax.
pub fn cross_entropy_with_logits(g: &mut Graph, logits: Var, labels: &[usize]) -> Result<Var> {
    let shape = g.shape(logits).to_vec();
    let [n, c] = shape[..] else {
        return Err(Error::Shape(format!("cross entropy expects N × C logits, got {shape:?}")));
    };
    if n != labels.len() {
        return Err(Error::Dimension(format!("{n} logit rows, {} labels", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange { label, classes: c });
    }
    let logp = g.log_softmax(logits)?;
    let picked = g.gather(logp, labels.iter().enumerate().map(|(i, &l)| i * c + l).collect())?;
    let total = g.sum(picked)?;
    g.scale(total, -1.0 / n as f64)
}

/// Mean binary cross entropy of one logit per row, `softplus(z) − y·z`.
pub fn bce_with_logits(g: &mut Graph, logits: Var, labels: &[usize]) -> Result<Var> {
    let n = g.value(logits).len();
    if g.value(logits).rows() != n {
        return Err(Error::Shape(format!(
            "binary cross entropy expects one logit per row, got {:?}",
            g.shape(logits)
        )));
    }
    if n != labels.len() {
        return Err(Error::Dimension(format!("{n} logits, {} labels", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::LabelOutOfRange { label, classes: 2 });
    }
    let y = Tensor::new(
        g.shape(logits).to_vec(),
        labels.iter().map(|&l| l as f64).collect(),
    )?;
    let sp = g.softplus(logits)?;
    let yz = g.mul_const(logits, y)?;
    let per = g.sub(sp, yz)?;
    g.mean(per)
}

/// Cross entropy for multi-column outputs, binary cross entropy for a
/// single output column.
pub fn standard_loss(g: &mut Graph, outputs: Var, labels: &[usize]) -> Result<Var> {
    if g.value(outputs).row_len() == 1 {
        bce_with_logits(g, outputs, labels)
    } else {
        cross_entropy_with_logits(g, outputs, labels)
    }
}
