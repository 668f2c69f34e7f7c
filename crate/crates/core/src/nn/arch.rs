// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named architectures, selectable at runtime.

use super::layer::{LayerKind, LayerSpec};
use super::model::Model;
use crate::error::{Error, Result};
use crate::registry::Registry;

pub trait Architecture: Send + Sync {
    /// Builds an initialized model for examples of `input_shape` with
    /// `outputs` output neurons.
    fn build(&self, input_shape: &[usize], outputs: usize, seed: u64) -> Result<Model>;
}

fn image_input(input_shape: &[usize]) -> Result<usize> {
    match *input_shape {
        [c, h, w] if h >= 6 && w >= 6 => Ok(c),
        _ => Err(Error::InvalidArgument(format!(
            "convolutional models need C × H × W inputs of side ≥ 6, got {input_shape:?}"
        ))),
    }
}

fn flat_after(input_shape: &[usize], ch: usize) -> usize {
    ch * ((input_shape[1] - 4) / 2) * ((input_shape[2] - 4) / 2)
}

/// conv 1→8, conv 8→16, max-pool, dense 64, dense out; ReLU after each
/// convolution and the hidden dense layer.
pub struct MiniLeNet;

impl Architecture for MiniLeNet {
    fn build(&self, input_shape: &[usize], outputs: usize, seed: u64) -> Result<Model> {
        let c = image_input(input_shape)?;
        let specs = vec![
            LayerSpec::new("conv1", LayerKind::Conv2d { in_channels: c, out_channels: 8, kernel: 3 }),
            LayerSpec::new("relu1", LayerKind::Relu),
            LayerSpec::new("conv2", LayerKind::Conv2d { in_channels: 8, out_channels: 16, kernel: 3 }),
            LayerSpec::new("relu2", LayerKind::Relu),
            LayerSpec::new("pool", LayerKind::MaxPool2d),
            LayerSpec::new("flatten", LayerKind::Flatten),
            LayerSpec::new("fc1", LayerKind::Dense { inputs: flat_after(input_shape, 16), outputs: 64 }),
            LayerSpec::new("relu3", LayerKind::Relu),
            LayerSpec::new("fc2", LayerKind::Dense { inputs: 64, outputs }),
        ];
        Model::new(input_shape, specs, seed)
    }
}

/// conv 1→32, conv 32→64, max-pool, dropout 0.25, dense 128, dropout 0.5,
/// dense out, log-softmax.
pub struct LeNet;

impl Architecture for LeNet {
    fn build(&self, input_shape: &[usize], outputs: usize, seed: u64) -> Result<Model> {
        let c = image_input(input_shape)?;
        let specs = vec![
            LayerSpec::new("conv1", LayerKind::Conv2d { in_channels: c, out_channels: 32, kernel: 3 }),
            LayerSpec::new("relu1", LayerKind::Relu),
            LayerSpec::new("conv2", LayerKind::Conv2d { in_channels: 32, out_channels: 64, kernel: 3 }),
            LayerSpec::new("relu2", LayerKind::Relu),
            LayerSpec::new("pool", LayerKind::MaxPool2d),
            LayerSpec::new("dropout1", LayerKind::Dropout { rate: 0.25 }),
            LayerSpec::new("flatten", LayerKind::Flatten),
            LayerSpec::new("fc1", LayerKind::Dense { inputs: flat_after(input_shape, 64), outputs: 128 }),
            LayerSpec::new("relu3", LayerKind::Relu),
            LayerSpec::new("dropout2", LayerKind::Dropout { rate: 0.5 }),
            LayerSpec::new("fc2", LayerKind::Dense { inputs: 128, outputs }),
            LayerSpec::new("log_softmax", LayerKind::LogSoftmax),
        ];
        Model::new(input_shape, specs, seed)
    }
}

/// ReLU perceptron with the given hidden widths. With `dropnorm`, every
/// hidden dense layer is followed by batch norm, ReLU and dropout.
pub struct Mlp {
    pub hidden: Vec<usize>,
    pub dropnorm: Option<f64>,
}

impl Architecture for Mlp {
    fn build(&self, input_shape: &[usize], outputs: usize, seed: u64) -> Result<Model> {
        let &[features] = input_shape else {
            return Err(Error::InvalidArgument(format!("MLPs need flat inputs, got {input_shape:?}")));
        };
        let mut specs = Vec::new();
        let mut width = features;
        for (i, &h) in self.hidden.iter().enumerate() {
            let k = i + 1;
            specs.push(LayerSpec::new(format!("fc{k}"), LayerKind::Dense { inputs: width, outputs: h }));
            if self.dropnorm.is_some() {
                specs.push(LayerSpec::new(format!("bn{k}"), LayerKind::BatchNorm1d { features: h }));
            }
            specs.push(LayerSpec::new(format!("relu{k}"), LayerKind::Relu));
            if let Some(rate) = self.dropnorm {
                specs.push(LayerSpec::new(format!("dropout{k}"), LayerKind::Dropout { rate }));
            }
            width = h;
        }
        specs.push(LayerSpec::new("out", LayerKind::Dense { inputs: width, outputs }));
        Model::new(input_shape, specs, seed)
    }
}

/// `mini-lenet`, `lenet`, `mlp-s` (100, 50), `mlp-v` (4 × 128) and `mlp-dn`
/// (4 × 128 with batch norm and 20% dropout).
pub fn architectures() -> Registry<dyn Architecture> {
    let mut r: Registry<dyn Architecture> = Registry::new("architecture");
    r.register("mini-lenet", Box::new(MiniLeNet))
        .register("lenet", Box::new(LeNet))
        .register("mlp-s", Box::new(Mlp { hidden: vec![100, 50], dropnorm: None }))
        .register("mlp-v", Box::new(Mlp { hidden: vec![128; 4], dropnorm: None }))
        .register("mlp-dn", Box::new(Mlp { hidden: vec![128; 4], dropnorm: Some(0.2) }));
    r
}
