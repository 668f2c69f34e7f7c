// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::data::WorldSample;
use crate::error::{Error, Result};
use crate::nn::{CaptureSet, LayerKind, Model};
use crate::reasons::{update, Belief, ReasonVector};
use crate::registry::Registry;

/// Norm used to rescale a layer's aggregate reason before updating.
pub trait Normalization: Send + Sync {
    fn norm(&self, v: &[f64]) -> f64;
}

struct L2;
struct L1;
struct MaxAbs;

impl Normalization for L2 {
    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Normalization for L1 {
    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }
}

impl Normalization for MaxAbs {
    fn norm(&self, v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `l2` (default), `l1`, `max`.
pub fn normalizations() -> Registry<dyn Normalization> {
    let mut r: Registry<dyn Normalization> = Registry::new("normalization");
    r.register("l2", Box::new(L2))
        .register("l1", Box::new(L1))
        .register("max", Box::new(MaxAbs));
    r
}

/// `beliefs[0]` is the prior; `beliefs[l + 1]` follows `layers[l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerwiseReport {
    pub layers: Vec<String>,
    pub beliefs: Vec<Belief>,
    pub flags: Vec<String>,
}

/// Layers contributing to a layerwise update: every capture point except
/// reshapes and dropout.
pub fn update_layers(model: &Model) -> Vec<&str> {
    model
        .layers()
        .iter()
        .filter(|l| !l.kind().is_activation() && !matches!(l.kind(), LayerKind::Flatten | LayerKind::Dropout { .. }))
        .map(|l| l.name())
        .collect()
}

/// Successively updates `b0` with each layer's normalized aggregate reason
/// (the sum of all its neurons' columns). A zero aggregate is applied as a
/// neutral update and flagged.
pub fn layerwise_update(
    model: &Model,
    sample: &WorldSample,
    b0: &Belief,
    normalization: &dyn Normalization,
) -> Result<LayerwiseReport> {
    let n = sample.worlds.len();
    if b0.len() != n {
        return Err(Error::Dimension(format!("prior over {} worlds, sample of {n}", b0.len())));
    }
    let layers = update_layers(model);
    let mut capture = CaptureSet::new(layers.iter().copied());
    model.evaluate(&sample.inputs, &mut capture)?;
    let mut beliefs = vec![b0.clone()];
    let mut flags = Vec::new();
    for &l in &layers {
        let t = capture.take(l).ok_or_else(|| Error::UnknownLayer(l.to_string()))?;
        let w = t.row_len();
        let mut agg: Vec<f64> = (0..n).map(|i| t.data()[i * w..(i + 1) * w].iter().sum()).collect();
        let norm = normalization.norm(&agg);
        if norm > 0.0 && norm.is_finite() {
            agg.iter_mut().for_each(|v| *v /= norm);
        } else {
            flags.push(format!("layer `{l}` has a zero aggregate reason; update skipped"));
            agg = vec![0.0; n];
        }
        let prev = beliefs.last().expect("prior is present");
        beliefs.push(update(prev, &ReasonVector::new(agg)?)?);
    }
    Ok(LayerwiseReport {
        layers: layers.into_iter().map(String::from).collect(),
        beliefs,
        flags,
    })
}
