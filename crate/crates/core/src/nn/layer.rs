// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::tensor::Tensor;

/// BatchNorm running-average weight given to each new batch.
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// `y = x W + b` with `W` stored `inputs × outputs`.
    Dense { inputs: usize, outputs: usize },
    Relu,
    /// Square kernel, stride 1, no padding.
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize },
    /// 2×2 window, stride 2.
    MaxPool2d,
    Flatten,
    /// Inverted dropout: kept units are scaled by `1 / (1 - rate)` in training.
    Dropout { rate: f64 },
    BatchNorm1d { features: usize },
    LogSoftmax,
    Sigmoid,
}

impl LayerKind {
    pub fn is_activation(&self) -> bool {
        matches!(self, LayerKind::Relu | LayerKind::Sigmoid)
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            LayerKind::Dense { .. } => 1,
            LayerKind::Relu => 2,
            LayerKind::Conv2d { .. } => 3,
            LayerKind::MaxPool2d => 4,
            LayerKind::Flatten => 5,
            LayerKind::Dropout { .. } => 6,
            LayerKind::BatchNorm1d { .. } => 7,
            LayerKind::LogSoftmax => 8,
            LayerKind::Sigmoid => 9,
        }
    }

    /// Per-example output shape, or a description of why `input` does not fit.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerKind::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(format!("expects [{inputs}], got {input:?}"));
                }
                Ok(vec![outputs])
            }
            LayerKind::Conv2d { in_channels, out_channels, kernel } => match *input {
                [c, h, w] if c == in_channels && h >= kernel && w >= kernel && kernel > 0 => {
                    Ok(vec![out_channels, h - kernel + 1, w - kernel + 1])
                }
                _ => Err(format!("expects [{in_channels}, H ≥ {kernel}, W ≥ {kernel}], got {input:?}")),
            },
            LayerKind::MaxPool2d => match *input {
                [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(format!("expects [C, H ≥ 2, W ≥ 2], got {input:?}")),
            },
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(format!("dropout rate {rate} outside [0, 1)"));
                }
                Ok(input.to_vec())
            }
            LayerKind::BatchNorm1d { features } => {
                if input != [features] {
                    return Err(format!("expects [{features}], got {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerKind::LogSoftmax => {
                if input.len() != 1 {
                    return Err(format!("expects a flat input, got {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerKind::Relu | LayerKind::Sigmoid => Ok(input.to_vec()),
        }
    }

    /// Trainable parameter shapes in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerKind::Dense { inputs, outputs } => vec![vec![inputs, outputs], vec![outputs]],
            LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                vec![vec![out_channels, in_channels, kernel, kernel], vec![out_channels]]
            }
            LayerKind::BatchNorm1d { features } => vec![vec![features], vec![features]],
            _ => Vec::new(),
        }
    }

    /// Non-trainable state (BatchNorm running mean and variance).
    pub fn buffer_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerKind::BatchNorm1d { features } => vec![vec![features], vec![features]],
            _ => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec { name: name.into(), kind }
    }
}

/// A layer with its parameters and buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Tensor>,
    pub buffers: Vec<Tensor>,
}

impl Layer {
    /// Weights uniform in `±√(6 / fan_in)` when `relu_follows`, otherwise
    /// `±1/√fan_in`; biases always `±1/√fan_in`. BatchNorm starts at the
    /// identity with unit running variance.
    pub fn init(spec: LayerSpec, relu_follows: bool, rng: &mut StreamRng) -> Layer {
        let shapes = spec.kind.param_shapes();
        let params = match spec.kind {
            LayerKind::Dense { .. } | LayerKind::Conv2d { .. } => {
                let fan_in = spec.kind.fan_in() as f64;
                let bound_b = 1.0 / fan_in.sqrt();
                let bound_w = if relu_follows { (6.0 / fan_in).sqrt() } else { bound_b };
                let draw = |shape: &[usize], bound: f64, rng: &mut StreamRng| {
                    let n = shape.iter().product();
                    Tensor::new(shape.to_vec(), (0..n).map(|_| rng::uniform(rng, -bound, bound)).collect())
                        .expect("parameter shape")
                };
                let w = draw(&shapes[0], bound_w, rng);
                let b = draw(&shapes[1], bound_b, rng);
                vec![w, b]
            }
            LayerKind::BatchNorm1d { features } => vec![Tensor::ones(&[features]), Tensor::zeros(&[features])],
            _ => Vec::new(),
        };
        let buffers = match spec.kind {
            LayerKind::BatchNorm1d { features } => vec![Tensor::zeros(&[features]), Tensor::ones(&[features])],
            _ => Vec::new(),
        };
        Layer { spec, params, buffers }
    }

    /// Checks parameter and buffer shapes against the spec.
    pub fn validate(&self) -> Result<()> {
        let check = |what: &str, got: &[Tensor], want: Vec<Vec<usize>>| {
            let got: Vec<&[usize]> = got.iter().map(Tensor::shape).collect();
            let want_ref: Vec<&[usize]> = want.iter().map(Vec::as_slice).collect();
            if got != want_ref {
                return Err(Error::Layer {
                    layer: self.spec.name.clone(),
                    detail: format!("{what} shapes {got:?}, expected {want_ref:?}"),
                });
            }
            Ok(())
        };
        check("parameter", &self.params, self.spec.kind.param_shapes())?;
        check("buffer", &self.buffers, self.spec.kind.buffer_shapes())
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn kind(&self) -> &LayerKind {
        &self.spec.kind
    }
}
