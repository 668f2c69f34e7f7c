// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reasons-based training objectives over one batch of outputs. In every
//! case the batch is the world set and each output column is a reasons
//! vector.

use super::strength::graph_strength;
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Batch, Objective, ObjectiveValue};
use crate::reasons::{Belief, Proposition};
use crate::tensor::Tensor;

/// Cosine similarities below this denominator are computed against it.
pub const COSINE_FLOOR: f64 = 1e-12;

fn class_proposition(labels: &[usize], d: usize) -> Proposition {
    Proposition::from_members(labels.iter().map(|&l| l == d).collect())
}

fn check_outputs(g: &Graph, outputs: Var, labels: &[usize]) -> Result<(usize, usize)> {
    let (n, c) = g.value(outputs).dims2()?;
    if n != labels.len() {
        return Err(Error::Dimension(format!("{n} output rows, {} labels", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange { label, classes: c });
    }
    Ok((n, c))
}

/// `Σ_d exp(−D(r_d, A_d, uniform))` with `r_d` the `d`-th output column and
/// `A_d` the batch examples labelled `d`. Classes absent from (or filling)
/// the batch have no defined strength; their terms are skipped and flagged.
pub fn doxastic_loss(g: &mut Graph, outputs: Var, labels: &[usize]) -> Result<ObjectiveValue> {
    let (n, c) = check_outputs(g, outputs, labels)?;
    let b = Belief::uniform(n.max(2));
    let mut out = ObjectiveValue::default();
    if n < 2 {
        out.flags.push("batch of one world".into());
        return Ok(out);
    }
    for d in 0..c {
        let a = class_proposition(labels, d);
        if a.is_empty() || a.count() == n {
            out.flags.push(format!("class {d} trivial in batch"));
            continue;
        }
        let r = g.column(outputs, d)?;
        let s = graph_strength(g, r, &a, &b)?;
        let neg = g.neg(s)?;
        let term = g.exp(neg)?;
        out.loss = Some(match out.loss {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    Ok(out)
}

/// `Σ_d (1 − cos(r_d, el_{A_d}))`.
pub fn elementary_loss(g: &mut Graph, outputs: Var, labels: &[usize]) -> Result<ObjectiveValue> {
    let (n, c) = check_outputs(g, outputs, labels)?;
    let el_norm = (n as f64).sqrt();
    let mut total: Option<Var> = None;
    for d in 0..c {
        let el = Tensor::vector(labels.iter().map(|&l| if l == d { 1.0 } else { -1.0 }).collect());
        let r = g.column(outputs, d)?;
        let prod = g.mul_const(r, el)?;
        let dot = g.sum(prod)?;
        let sq = g.mul(r, r)?;
        let ss = g.sum(sq)?;
        let floored = g.clamp_min(ss, (COSINE_FLOOR / el_norm).powi(2))?;
        let norm = g.sqrt(floored)?;
        let denom = g.scale(norm, el_norm)?;
        let cos = g.div(dot, denom)?;
        let neg = g.neg(cos)?;
        let term = g.add_scalar(neg, 1.0)?;
        total = Some(match total {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    Ok(ObjectiveValue {
        loss: total,
        flags: Vec::new(),
    })
}

/// `(D(ŷ, A₊, b(·|P)) − D(ŷ, A₊, b(·|U)))²` for single-logit outputs, where
/// `A₊` is the set of predicted positives (logit > 0, held fixed during
/// differentiation) and `b(·|P)`, `b(·|U)` are the uniform batch belief
/// conditioned on the privileged and unprivileged groups. Contributes
/// nothing, with a flag, when `A₊` is trivial under either conditional.
pub fn reasons_difference_loss(g: &mut Graph, outputs: Var, privileged: &[bool]) -> Result<ObjectiveValue> {
    let (n, w) = g.value(outputs).dims2()?;
    if w != 1 {
        return Err(Error::Shape(format!("reasons difference needs one output column, got {w}")));
    }
    if privileged.len() != n {
        return Err(Error::Dimension(format!("{n} outputs, {} group flags", privileged.len())));
    }
    let mut out = ObjectiveValue::default();
    let Some((positive, beliefs)) = rd_setup(g.value(outputs).data(), privileged, &mut out.flags) else {
        return Ok(out);
    };
    let y = g.reshape(outputs, &[n])?;
    let dp = graph_strength(g, y, &positive, &beliefs[0])?;
    let du = graph_strength(g, y, &positive, &beliefs[1])?;
    let diff = g.sub(dp, du)?;
    out.loss = Some(g.mul(diff, diff)?);
    Ok(out)
}

/// Predicted-positive proposition and the two group-conditional uniform
/// beliefs, or `None` (with a flag) when the difference is undefined.
pub(crate) fn rd_setup(
    logits: &[f64],
    privileged: &[bool],
    flags: &mut Vec<String>,
) -> Option<(Proposition, [Belief; 2])> {
    let n = logits.len();
    if n < 2 {
        flags.push("batch of one world".into());
        return None;
    }
    let positive = Proposition::from_members(logits.iter().map(|&z| z > 0.0).collect());
    let uniform = Belief::uniform(n);
    let mut beliefs = Vec::with_capacity(2);
    for (name, flag) in [("privileged", true), ("unprivileged", false)] {
        let group = Proposition::from_members(privileged.iter().map(|&p| p == flag).collect());
        let Ok(b) = uniform.conditionalize(&group) else {
            flags.push(format!("{name} group empty"));
            return None;
        };
        let inside = group.intersect(&positive).count();
        if inside == 0 || inside == group.count() {
            flags.push(format!("predicted positives trivial within {name} group"));
            return None;
        }
        beliefs.push(b);
    }
    let [bp, bu]: [Belief; 2] = beliefs.try_into().ok()?;
    Some((positive, [bp, bu]))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DoxasticLoss;

impl Objective for DoxasticLoss {
    fn name(&self) -> &str {
        "doxastic"
    }

    fn evaluate(&self, g: &mut Graph, outputs: Var, batch: &Batch) -> Result<ObjectiveValue> {
        doxastic_loss(g, outputs, &batch.labels)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ElementaryLoss;

impl Objective for ElementaryLoss {
    fn name(&self) -> &str {
        "elementary"
    }

    fn evaluate(&self, g: &mut Graph, outputs: Var, batch: &Batch) -> Result<ObjectiveValue> {
        elementary_loss(g, outputs, &batch.labels)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReasonsDifferenceLoss;

impl Objective for ReasonsDifferenceLoss {
    fn name(&self) -> &str {
        "reasons_difference"
    }

    fn evaluate(&self, g: &mut Graph, outputs: Var, batch: &Batch) -> Result<ObjectiveValue> {
        let privileged = batch
            .privileged
            .as_deref()
            .ok_or_else(|| Error::MissingAttribute(crate::data::GROUP_ATTR.into()))?;
        reasons_difference_loss(g, outputs, privileged)
    }
}
