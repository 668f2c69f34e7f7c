// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::losses::rd_setup;
use crate::error::{Error, Result};
use crate::reasons::{strength, ReasonVector};

fn rate(hits: usize, total: usize, what: &str) -> Result<f64> {
    if total == 0 {
        return Err(Error::UndefinedMetric(format!("{what} is empty")));
    }
    Ok(hits as f64 / total as f64)
}

fn check(preds: &[usize], privileged: &[bool]) -> Result<()> {
    if preds.len() != privileged.len() {
        return Err(Error::Dimension(format!(
            "{} predictions, {} group flags",
            preds.len(),
            privileged.len()
        )));
    }
    Ok(())
}

/// `P(ŷ = 1 | unprivileged) / P(ŷ = 1 | privileged)`.
pub fn disparate_impact(preds: &[usize], privileged: &[bool]) -> Result<f64> {
    check(preds, privileged)?;
    let positive_rate = |flag: bool, what: &str| {
        let members: Vec<usize> = (0..preds.len()).filter(|&i| privileged[i] == flag).collect();
        rate(members.iter().filter(|&&i| preds[i] == 1).count(), members.len(), what)
    };
    let p = positive_rate(true, "privileged group")?;
    let u = positive_rate(false, "unprivileged group")?;
    if p == 0.0 {
        return Err(Error::UndefinedMetric("privileged group has no positive predictions".into()));
    }
    Ok(u / p)
}

/// `|TPR_privileged − TPR_unprivileged|`.
pub fn equality_of_opportunity(preds: &[usize], labels: &[usize], privileged: &[bool]) -> Result<f64> {
    check(preds, privileged)?;
    if labels.len() != preds.len() {
        return Err(Error::Dimension(format!("{} predictions, {} labels", preds.len(), labels.len())));
    }
    let tpr = |flag: bool, what: &str| {
        let pos: Vec<usize> = (0..preds.len())
            .filter(|&i| privileged[i] == flag && labels[i] == 1)
            .collect();
        rate(pos.iter().filter(|&&i| preds[i] == 1).count(), pos.len(), what)
    };
    Ok((tpr(true, "privileged positives")? - tpr(false, "unprivileged positives")?).abs())
}

/// Reasons difference of single-logit outputs over a world set, as a
/// metric. `None` when undefined (see the loss of the same name).
pub fn reasons_difference(logits: &[f64], privileged: &[bool]) -> Result<Option<f64>> {
    if logits.len() != privileged.len() {
        return Err(Error::Dimension(format!(
            "{} outputs, {} group flags",
            logits.len(),
            privileged.len()
        )));
    }
    let mut flags = Vec::new();
    let Some((positive, [bp, bu])) = rd_setup(logits, privileged, &mut flags) else {
        return Ok(None);
    };
    let r = ReasonVector::new(logits.to_vec())?;
    let d = strength(&r, &positive, &bp)? - strength(&r, &positive, &bu)?;
    Ok(Some(d * d))
}

/// Accuracy, F1 and the three fairness metrics for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub model: String,
    pub accuracy: f64,
    pub f1: f64,
    pub di: Option<f64>,
    pub eoo: Option<f64>,
    pub rd: Option<f64>,
}
