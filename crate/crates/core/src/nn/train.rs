// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::layer::{LayerKind, BN_MOMENTUM};
use super::loss::standard_loss;
use super::metrics::predictions;
use super::model::{ForwardCtx, Mode, Model};
use super::optim::{AdamW, AdamWConfig};
use crate::autodiff::{Graph, Var};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// One minibatch as seen by an objective.
#[derive(Clone, Debug)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub privileged: Option<Vec<bool>>,
    pub classes: usize,
}

impl Batch {
    pub fn from_dataset(data: &Dataset, indices: &[usize]) -> Result<Self> {
        Ok(Batch {
            inputs: data.batch(indices)?,
            labels: indices.iter().map(|&i| data.labels()[i]).collect(),
            privileged: data.privileged().map(|p| indices.iter().map(|&i| p[i]).collect()),
            classes: data.classes(),
        })
    }
}

/// Result of evaluating one objective on a batch. `loss` is `None` when the
/// objective has nothing to contribute (every term degenerate); `flags`
/// explains anything skipped.
#[derive(Debug, Default)]
pub struct ObjectiveValue {
    pub loss: Option<Var>,
    pub flags: Vec<String>,
}

/// A differentiable training objective on model outputs.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, g: &mut Graph, outputs: Var, batch: &Batch) -> Result<ObjectiveValue>;
}

/// Cross entropy, or binary cross entropy for single-output models.
#[derive(Clone, Copy, Debug, Default)]
pub struct StandardLoss;

impl Objective for StandardLoss {
    fn name(&self) -> &str {
        "standard"
    }

    fn evaluate(&self, g: &mut Graph, outputs: Var, batch: &Batch) -> Result<ObjectiveValue> {
        Ok(ObjectiveValue {
            loss: Some(standard_loss(g, outputs, &batch.labels)?),
            flags: Vec::new(),
        })
    }
}

#[derive(Clone)]
pub struct LossTerm {
    pub weight: f64,
    pub objective: Arc<dyn Objective>,
}

impl fmt::Debug for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}", self.weight, self.objective.name())
    }
}

/// Weighted sum of objectives. Terms with weight 0 are never evaluated, so
/// they cannot influence training in any way.
#[derive(Clone, Debug)]
pub struct LossSpec {
    terms: Vec<LossTerm>,
}

/// Values of one [`LossSpec`] evaluation.
#[derive(Debug)]
pub struct LossValue {
    pub total: Option<Var>,
    pub terms: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

impl LossSpec {
    pub fn new(terms: Vec<LossTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("a loss needs at least one term".into()));
        }
        if let Some(t) = terms.iter().find(|t| !t.weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight {} for `{}` is not finite",
                t.weight,
                t.objective.name()
            )));
        }
        Ok(LossSpec { terms })
    }

    pub fn standard() -> Self {
        LossSpec {
            terms: vec![LossTerm {
                weight: 1.0,
                objective: Arc::new(StandardLoss),
            }],
        }
    }

    /// Standard loss plus `weight` times `extra`.
    pub fn combined(extra: Arc<dyn Objective>, weight: f64) -> Result<Self> {
        Self::new(vec![
            LossTerm {
                weight: 1.0,
                objective: Arc::new(StandardLoss),
            },
            LossTerm { weight, objective: extra },
        ])
    }

    pub fn terms(&self) -> &[LossTerm] {
        &self.terms
    }

    pub fn evaluate(&self, g: &mut Graph, outputs: Var, batch: &Batch) -> Result<LossValue> {
        let mut total: Option<Var> = None;
        let mut terms = Vec::new();
        let mut flags = Vec::new();
        for t in self.terms.iter().filter(|t| t.weight != 0.0) {
            let v = t.objective.evaluate(g, outputs, batch)?;
            flags.extend(v.flags.into_iter().map(|f| format!("{}: {f}", t.objective.name())));
            let Some(l) = v.loss else { continue };
            terms.push((t.objective.name().to_string(), g.value(l).item()?));
            let weighted = if t.weight == 1.0 { l } else { g.scale(l, t.weight)? };
            total = Some(match total {
                None => weighted,
                Some(acc) => g.add(acc, weighted)?,
            });
        }
        Ok(LossValue { total, terms, flags })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            optimizer: AdamWConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub terms: BTreeMap<String, f64>,
    pub train_accuracy: f64,
    pub skipped_terms: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Flag text → number of batches it was raised on.
    pub flags: BTreeMap<String, usize>,
}

/// Batches of one epoch: a seeded permutation cut into `batch_size` pieces.
/// A trailing batch of one example joins the previous batch so batch
/// statistics stay defined.
pub fn batch_order(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::stream(seed, (tags::SHUFFLE << 32) | epoch as u64), &mut order);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(last);
        }
    }
    batches
}

fn diverged(epoch: usize) -> Error {
    Error::Divergence {
        epoch,
        last_good: epoch.checked_sub(1),
    }
}

struct StepOutcome {
    /// `None` when every loss term was skipped and no update happened.
    loss: Option<f64>,
    terms: Vec<(String, f64)>,
    flags: Vec<String>,
    correct: usize,
}

fn train_step(
    model: &mut Model,
    opt: &mut AdamW,
    loss: &LossSpec,
    batch: &Batch,
    ctx: &mut ForwardCtx,
) -> Result<StepOutcome> {
    let mut g = Graph::new();
    let x = g.constant(batch.inputs.clone());
    let out = model.forward_graph(&mut g, x, ctx)?;
    let preds = predictions(g.value(out));
    let correct = preds.iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
    let value = loss.evaluate(&mut g, out, batch)?;
    let mut outcome = StepOutcome {
        loss: None,
        terms: value.terms,
        flags: value.flags,
        correct,
    };
    let Some(total) = value.total else {
        return Ok(outcome);
    };
    let l = g.value(total).item()?;
    if !l.is_finite() {
        return Err(Error::Degenerate(format!("loss {l}")));
    }
    let grads = g.backward(total)?;
    let grads: Vec<Tensor> = ctx.params.iter().flatten().map(|&v| grads.wrt(&g, v)).collect();
    opt.step(&mut model.params_mut(), &grads)?;
    for (i, stats) in ctx.bn_stats.drain(..) {
        let layer = &mut model.layers_mut()[i];
        debug_assert!(matches!(layer.kind(), LayerKind::BatchNorm1d { .. }));
        let (mean, var) = layer.buffers.split_at_mut(1);
        for (r, b) in mean[0].data_mut().iter_mut().zip(&stats.mean) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
        for (r, b) in var[0].data_mut().iter_mut().zip(&stats.var) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
    }
    if !model.params_finite() {
        return Err(Error::Degenerate("non-finite parameters after update".into()));
    }
    outcome.loss = Some(l);
    Ok(outcome)
}

/// Minibatch AdamW training. Batch order and dropout masks depend only on
/// `cfg.seed` and the epoch, so two models trained with equal configs see
/// identical batches. Any non-finite loss or parameter aborts with
/// [`Error::Divergence`]. The model is left in evaluation mode.
pub fn train_loop(model: &mut Model, data: &Dataset, loss: &LossSpec, cfg: &TrainConfig) -> Result<TrainHistory> {
    if data.input_shape() != model.input_shape() {
        return Err(Error::Layer {
            layer: model.layers()[0].name().to_string(),
            detail: format!(
                "dataset examples are {:?}, model expects {:?}",
                data.input_shape(),
                model.input_shape()
            ),
        });
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument("training needs at least two examples".into()));
    }
    let active = loss.terms().iter().filter(|t| t.weight != 0.0).count();
    let mut opt = AdamW::new(cfg.optimizer);
    let mut history = TrainHistory::default();
    model.set_mode(Mode::Train);
    for epoch in 0..cfg.epochs {
        let mut ctx = ForwardCtx::training(rng::stream(cfg.seed, (tags::DROPOUT << 32) | epoch as u64));
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        let (mut loss_sum, mut seen, mut correct, mut skipped) = (0.0, 0usize, 0usize, 0usize);
        for idx in batch_order(data.len(), cfg.batch_size, cfg.seed, epoch) {
            let batch = Batch::from_dataset(data, &idx)?;
            ctx.params.clear();
            ctx.bn_stats.clear();
            let step = match train_step(model, &mut opt, loss, &batch, &mut ctx) {
                Ok(s) => s,
                Err(Error::Domain { .. } | Error::Degenerate(_)) => {
                    model.set_mode(Mode::Eval);
                    return Err(diverged(epoch));
                }
                Err(e) => return Err(e),
            };
            correct += step.correct;
            for f in step.flags {
                *history.flags.entry(f).or_default() += 1;
            }
            skipped += active - step.terms.len();
            let Some(l) = step.loss else { continue };
            loss_sum += l * idx.len() as f64;
            seen += idx.len();
            for (name, v) in step.terms {
                *sums.entry(name).or_default() += v * idx.len() as f64;
            }
        }
        let denom = seen.max(1) as f64;
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / denom,
            terms: sums.into_iter().map(|(k, v)| (k, v / denom)).collect(),
            train_accuracy: correct as f64 / data.len() as f64,
            skipped_terms: skipped,
        });
    }
    model.set_mode(Mode::Eval);
    Ok(history)
}
