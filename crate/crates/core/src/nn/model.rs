// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::{Layer, LayerKind, LayerSpec, BN_EPS};
use crate::autodiff::{BatchNormMode, BatchStats, Graph, Var};
use crate::error::{Error, Result};
use crate::rng::{self, tags, StreamRng};
use crate::tensor::Tensor;

/// Rows per forward pass when evaluating large inputs.
pub const EVAL_CHUNK: usize = 256;

/// Capture-name suffix selecting a layer's output before its activation.
pub const PRE_SUFFIX: &str = ":pre";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Activation capture requests and results.
///
/// A request names a layer; the captured tensor is that layer's output after
/// any activation layers that directly follow it, so `fc1` in
/// `fc1 → relu → fc2` yields the post-ReLU values. Neuron `j` of a capture is
/// flat index `j` of one example's slice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CaptureSet {
    requested: Vec<String>,
    captured: BTreeMap<String, Tensor>,
}

impl CaptureSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        CaptureSet {
            requested: names.into_iter().map(Into::into).collect(),
            captured: BTreeMap::new(),
        }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn requested(&self) -> &[String] {
        &self.requested
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.captured.get(name)
    }

    pub fn take(&mut self, name: &str) -> Option<Tensor> {
        self.captured.remove(name)
    }
}

pub(crate) type PatchFn<'a> = &'a (dyn Fn(&mut Tensor) -> Result<()> + Sync);

/// Per-pass state threaded through [`Model::forward_graph`].
pub(crate) struct ForwardCtx<'a> {
    pub train: bool,
    pub param_leaves: bool,
    pub dropout: Option<StreamRng>,
    pub capture: Vec<(usize, String)>,
    pub captured: BTreeMap<String, Tensor>,
    pub patch: Option<(usize, PatchFn<'a>)>,
    pub params: Vec<Vec<Var>>,
    pub bn_stats: Vec<(usize, BatchStats)>,
}

impl<'a> ForwardCtx<'a> {
    pub fn eval() -> Self {
        ForwardCtx {
            train: false,
            param_leaves: false,
            dropout: None,
            capture: Vec::new(),
            captured: BTreeMap::new(),
            patch: None,
            params: Vec::new(),
            bn_stats: Vec::new(),
        }
    }

    pub fn training(dropout: StreamRng) -> Self {
        ForwardCtx {
            train: true,
            param_leaves: true,
            dropout: Some(dropout),
            ..Self::eval()
        }
    }
}

/// A sequential network with named layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    shapes: Vec<Vec<usize>>,
    mode: Mode,
    seed: u64,
}

fn infer_shapes(input_shape: &[usize], specs: &[&LayerSpec]) -> Result<Vec<Vec<usize>>> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("a model needs at least one layer".into()));
    }
    let mut seen = HashSet::new();
    let mut shape = input_shape.to_vec();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        if spec.name.contains(':') {
            return Err(Error::Layer {
                layer: spec.name.clone(),
                detail: "layer names may not contain `:`".into(),
            });
        }
        if !seen.insert(spec.name.as_str()) {
            return Err(Error::Layer {
                layer: spec.name.clone(),
                detail: "duplicate layer name".into(),
            });
        }
        shape = spec.kind.output_shape(&shape).map_err(|detail| Error::Layer {
            layer: spec.name.clone(),
            detail,
        })?;
        out.push(shape.clone());
    }
    Ok(out)
}

fn relu_follows(specs: &[LayerSpec], i: usize) -> bool {
    specs[i + 1..]
        .iter()
        .find(|s| !matches!(s.kind, LayerKind::BatchNorm1d { .. } | LayerKind::Dropout { .. }))
        .is_some_and(|s| s.kind == LayerKind::Relu)
}

fn name_error(layer: &str, e: Error) -> Error {
    match e {
        Error::Shape(detail) => Error::Layer {
            layer: layer.to_string(),
            detail,
        },
        e => e,
    }
}

impl Model {
    /// Builds and initializes a model. Parameters are drawn in layer order
    /// from a stream derived from `seed`.
    pub fn new(input_shape: &[usize], specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let shapes = infer_shapes(input_shape, &specs.iter().collect::<Vec<_>>())?;
        let mut rng = rng::stream(seed, tags::INIT);
        let layers = (0..specs.len())
            .map(|i| Layer::init(specs[i].clone(), relu_follows(&specs, i), &mut rng))
            .collect();
        Ok(Model {
            layers,
            input_shape: input_shape.to_vec(),
            shapes,
            mode: Mode::Eval,
            seed,
        })
    }

    /// Assembles a model from existing layers, checking every shape.
    pub fn from_layers(input_shape: &[usize], layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let shapes = infer_shapes(input_shape, &layers.iter().map(|l| &l.spec).collect::<Vec<_>>())?;
        for l in &layers {
            l.validate()?;
        }
        Ok(Model {
            layers,
            input_shape: input_shape.to_vec(),
            shapes,
            mode: Mode::Eval,
            seed,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-example output shape of layer `i`.
    pub fn layer_shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn output_width(&self) -> usize {
        self.shapes.last().map(|s| s.iter().product()).unwrap_or(0)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name() == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    /// Index of the layer whose output a capture of `name` records. A plain
    /// layer name reads past any activation functions directly after it;
    /// `name:pre` reads the layer's own output.
    pub fn capture_end(&self, name: &str) -> Result<usize> {
        if let Some(raw) = name.strip_suffix(PRE_SUFFIX) {
            return self.layer_index(raw);
        }
        let mut i = self.layer_index(name)?;
        while i + 1 < self.layers.len() && self.layers[i + 1].kind().is_activation() {
            i += 1;
        }
        Ok(i)
    }

    /// Neurons in a capture of `name`.
    pub fn capture_width(&self, name: &str) -> Result<usize> {
        Ok(self.shapes[self.capture_end(name)?].iter().product())
    }

    /// Names of layers that are not activation functions, in order. These are
    /// the natural capture points.
    pub fn capture_points(&self) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| !l.kind().is_activation())
            .map(Layer::name)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.params).map(Tensor::len).sum()
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.params.iter().chain(&l.buffers))
            .all(Tensor::all_finite)
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut()).collect()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.rank() < 1 || batch.shape()[1..] != self.input_shape[..] {
            return Err(Error::Layer {
                layer: self.layers[0].name().to_string(),
                detail: format!(
                    "batch shape {:?} does not match input shape [N, {}]",
                    batch.shape(),
                    self.input_shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
                ),
            });
        }
        Ok(())
    }

    fn capture_plan(&self, capture: &CaptureSet) -> Result<Vec<(usize, String)>> {
        capture
            .requested
            .iter()
            .map(|n| Ok((self.capture_end(n)?, n.clone())))
            .collect()
    }

    /// Records the forward pass of `self` on `g`, starting from `x`.
    pub(crate) fn forward_graph(&self, g: &mut Graph, x: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let pv: Vec<Var> = layer
                .params
                .iter()
                .map(|p| if ctx.param_leaves { g.leaf(p.clone()) } else { g.constant(p.clone()) })
                .collect();
            h = self.apply(g, i, h, &pv, ctx).map_err(|e| name_error(layer.name(), e))?;
            ctx.params.push(pv);
            for (end, name) in &ctx.capture {
                if *end == i {
                    ctx.captured.insert(name.clone(), g.value(h).clone());
                }
            }
            if let Some((at, patch)) = ctx.patch {
                if at == i {
                    let mut t = g.value(h).clone();
                    patch(&mut t)?;
                    h = g.constant(t);
                }
            }
        }
        Ok(h)
    }

    fn apply(&self, g: &mut Graph, i: usize, h: Var, pv: &[Var], ctx: &mut ForwardCtx) -> Result<Var> {
        let layer = &self.layers[i];
        match *layer.kind() {
            LayerKind::Dense { .. } => {
                let y = g.matmul(h, pv[0])?;
                g.add_bias(y, pv[1])
            }
            LayerKind::Conv2d { .. } => g.conv2d(h, pv[0], pv[1]),
            LayerKind::MaxPool2d => g.max_pool2d(h),
            LayerKind::Flatten => {
                let n = g.shape(h)[0];
                let w = self.shapes[i][0];
                g.reshape(h, &[n, w])
            }
            LayerKind::Relu => g.relu(h),
            LayerKind::Sigmoid => g.sigmoid(h),
            LayerKind::LogSoftmax => g.log_softmax(h),
            LayerKind::Dropout { rate } => {
                if !ctx.train || rate == 0.0 {
                    return Ok(h);
                }
                let seed = self.seed;
                let rng = ctx.dropout.get_or_insert_with(|| rng::stream(seed, tags::DROPOUT));
                let keep = 1.0 - rate;
                let shape = g.shape(h).to_vec();
                let n = g.value(h).len();
                let mask = (0..n).map(|_| if rng::unit(rng) < keep { 1.0 / keep } else { 0.0 }).collect();
                g.mul_const(h, Tensor::new(shape, mask)?)
            }
            LayerKind::BatchNorm1d { .. } => {
                if ctx.train {
                    let (y, stats) = g.batch_norm(h, pv[0], pv[1], BatchNormMode::Batch { eps: BN_EPS })?;
                    if let Some(s) = stats {
                        ctx.bn_stats.push((i, s));
                    }
                    Ok(y)
                } else {
                    let mode = BatchNormMode::Running {
                        mean: layer.buffers[0].data(),
                        var: layer.buffers[1].data(),
                        eps: BN_EPS,
                    };
                    Ok(g.batch_norm(h, pv[0], pv[1], mode)?.0)
                }
            }
        }
    }

    /// One forward pass over `batch` in the model's current mode. Training
    /// mode draws dropout masks from the model seed and normalizes with batch
    /// statistics, without touching running statistics.
    pub fn forward(&self, batch: &Tensor, capture: &mut CaptureSet) -> Result<Tensor> {
        self.check_batch(batch)?;
        let mut ctx = ForwardCtx::eval();
        ctx.train = self.mode == Mode::Train;
        ctx.capture = self.capture_plan(capture)?;
        let mut g = Graph::new();
        let x = g.constant(batch.clone());
        let y = self.forward_graph(&mut g, x, &mut ctx)?;
        capture.captured.append(&mut ctx.captured);
        Ok(g.value(y).clone())
    }

    /// Evaluation-mode outputs for any number of rows, computed in chunks
    /// across threads. Captures are concatenated in row order.
    pub fn evaluate(&self, inputs: &Tensor, capture: &mut CaptureSet) -> Result<Tensor> {
        self.eval_chunks(inputs, capture, None)
    }

    /// Evaluation-mode forward pass that rewrites the capture of `layer` with
    /// `patch` before continuing.
    pub fn forward_patched(
        &self,
        inputs: &Tensor,
        layer: &str,
        patch: &(dyn Fn(&mut Tensor) -> Result<()> + Sync),
    ) -> Result<Tensor> {
        let at = self.capture_end(layer)?;
        self.eval_chunks(inputs, &mut CaptureSet::none(), Some((at, patch)))
    }

    fn eval_chunks(
        &self,
        inputs: &Tensor,
        capture: &mut CaptureSet,
        patch: Option<(usize, PatchFn)>,
    ) -> Result<Tensor> {
        self.check_batch(inputs)?;
        let plan = self.capture_plan(capture)?;
        let n = inputs.rows();
        let starts: Vec<usize> = (0..n).step_by(EVAL_CHUNK).collect();
        let parts: Vec<(Tensor, BTreeMap<String, Tensor>)> = starts
            .par_iter()
            .map(|&s| {
                let chunk = inputs.slice_rows(s, (s + EVAL_CHUNK).min(n))?;
                let mut ctx = ForwardCtx::eval();
                ctx.capture = plan.clone();
                ctx.patch = patch;
                let mut g = Graph::new();
                let x = g.constant(chunk);
                let y = self.forward_graph(&mut g, x, &mut ctx)?;
                Ok((g.value(y).clone(), ctx.captured))
            })
            .collect::<Result<_>>()?;
        for (_, name) in &plan {
            let pieces: Vec<Tensor> = parts.iter().map(|(_, c)| c[name].clone()).collect();
            capture.captured.insert(name.clone(), Tensor::concat_rows(&pieces)?);
        }
        let outs: Vec<Tensor> = parts.into_iter().map(|(o, _)| o).collect();
        Tensor::concat_rows(&outs)
    }

    /// Loss value and its gradient with respect to the inputs, with
    /// parameters held fixed and evaluation semantics.
    pub fn input_gradient(
        &self,
        inputs: &Tensor,
        loss: &dyn Fn(&mut Graph, Var) -> Result<Var>,
    ) -> Result<(f64, Tensor)> {
        self.check_batch(inputs)?;
        let mut g = Graph::new();
        let x = g.leaf(inputs.clone());
        let y = self.forward_graph(&mut g, x, &mut ForwardCtx::eval())?;
        let l = loss(&mut g, y)?;
        let grads = g.backward(l)?;
        Ok((g.value(l).item()?, grads.wrt(&g, x)))
    }
}
