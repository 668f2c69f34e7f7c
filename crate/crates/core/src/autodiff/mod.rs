// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dynamic reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] is an append-only tape: every operation pushes a node whose
//! parents are strictly earlier, so the tape order is a topological order and
//! the graph is acyclic by construction. [`Graph::backward`] walks the tape in
//! reverse from a scalar root and accumulates vector-Jacobian products.
//!
//! Binary operations broadcast only scalar-with-tensor; anything else must
//! match in shape.

mod check;
mod layers;

pub use check::{grad_check, grad_check_with};
pub use layers::{BatchNormMode, BatchStats};

use crate::error::{Error, Result};
use crate::tensor::{gemm, ConvGeometry, Layout, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    Sigmoid(Var),
    Sqrt(Var),
    Softplus(Var),
    /// Constant offset; identity gradient.
    Offset(Var),
    /// Product with a constant tensor (or scalar).
    MulConst(Var, Tensor),
    ClampMin(Var, f64),
    Sum(Var),
    SumAxis { x: Var, outer: usize, len: usize, inner: usize },
    /// Subtracts the detached max along an axis; identity gradient.
    MaxShift(Var),
    LogSumExp { x: Var, outer: usize, len: usize, inner: usize },
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Gather(Var, Vec<usize>),
    AddBias(Var, Var),
    LogSoftmax(Var),
    Conv2d { input: Var, weight: Var, bias: Var, geom: ConvGeometry, cols: Vec<f64> },
    MaxPool2d { input: Var, argmax: Vec<usize> },
    BatchNorm { input: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, train: bool },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Append-only computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of its shape when no path reaches it.
    pub fn wrt(&self, graph: &Graph, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(graph.value(v).shape()))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn finite(op: &'static str, t: Tensor) -> Result<Tensor> {
    if t.all_finite() {
        Ok(t)
    } else {
        Err(Error::domain(op, "result is not finite"))
    }
}

/// Elementwise binary map with scalar broadcasting.
fn broadcast(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    if b.is_scalar() {
        let s = b.data()[0];
        return Ok(a.map(|v| f(v, s)));
    }
    if a.is_scalar() {
        let s = a.data()[0];
        return Ok(b.map(|v| f(s, v)));
    }
    Err(Error::Shape(format!(
        "{op}: cannot broadcast {:?} with {:?}",
        a.shape(),
        b.shape()
    )))
}

/// Sums a broadcast gradient back down to `shape`.
fn reduce_to(g: Tensor, shape: &[usize]) -> Tensor {
    if g.shape() == shape {
        g
    } else {
        Tensor::new(shape.to_vec(), vec![g.sum()]).unwrap_or_else(|_| Tensor::scalar(g.sum()))
    }
}

fn axis_split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::domain("reduce", format!("axis {axis} out of range for shape {shape:?}")));
    }
    let outer = shape[..axis].iter().product();
    let len = shape[axis];
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, len, inner))
}

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s.remove(axis);
    s
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// An input that is never differentiated.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn unary(&mut self, op_name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let value = finite(op_name, self.value(x).map(f))?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, op, ng))
    }

    fn binary(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let value = finite(op_name, broadcast(op_name, self.value(a), self.value(b), f)?)?;
        let ng = self.needs(&[a, b]);
        Ok(self.push(value, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).data().iter().any(|&v| v == 0.0) {
            return Err(Error::domain("div", "division by zero"));
        }
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.unary("neg", x, |v| -v, Op::Neg(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary("exp", x, f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(v) = self.value(x).data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::domain("log", format!("non-positive argument {v}")));
        }
        self.unary("log", x, f64::ln, Op::Log(x))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary("relu", x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, sigmoid, Op::Sigmoid(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        if let Some(v) = self.value(x).data().iter().find(|&&v| v < 0.0) {
            return Err(Error::domain("sqrt", format!("negative argument {v}")));
        }
        self.unary("sqrt", x, f64::sqrt, Op::Sqrt(x))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        self.unary("softplus", x, softplus, Op::Softplus(x))
    }

    /// `x + c` for a constant `c` (scalar or same shape).
    pub fn add_const(&mut self, x: Var, c: &Tensor) -> Result<Var> {
        let value = finite("add_const", broadcast("add_const", self.value(x), c, |a, b| a + b)?)?;
        if value.shape() != self.shape(x) {
            return Err(Error::Shape("add_const may not broadcast the variable".into()));
        }
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::Offset(x), ng))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.add_const(x, &Tensor::scalar(c))
    }

    /// `x ⊙ c` for a constant `c` (scalar or same shape).
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        let value = finite("mul_const", broadcast("mul_const", self.value(x), &c, |a, b| a * b)?)?;
        if value.shape() != self.shape(x) {
            return Err(Error::Shape("mul_const may not broadcast the variable".into()));
        }
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::MulConst(x, c), ng))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.mul_const(x, Tensor::scalar(c))
    }

    /// `max(x, lo)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, x: Var, lo: f64) -> Result<Var> {
        self.unary("clamp_min", x, |v| v.max(lo), Op::ClampMin(x, lo))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = finite("sum", Tensor::scalar(self.value(x).sum()))?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::Sum(x), ng))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len() as f64;
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n)
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, len, inner) = axis_split(&shape, axis)?;
        let src = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    out[o * inner + i] += src[(o * len + l) * inner + i];
                }
            }
        }
        let value = finite("sum_axis", Tensor::new(reduced_shape(&shape, axis), out)?)?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::SumAxis { x, outer, len, inner }, ng))
    }

    /// `x - max(x)` along `axis`, with the max treated as a constant.
    pub fn max_const_shift(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, len, inner) = axis_split(&shape, axis)?;
        let mut data = self.value(x).data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |l: usize| (o * len + l) * inner + i;
                let m = (0..len).map(|l| data[idx(l)]).fold(f64::NEG_INFINITY, f64::max);
                for l in 0..len {
                    data[idx(l)] -= m;
                }
            }
        }
        let value = Tensor::new(shape, data)?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::MaxShift(x), ng))
    }

    /// Stable `ln Σ exp` along `axis`.
    pub fn logsumexp(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, len, inner) = axis_split(&shape, axis)?;
        let src = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |l: usize| (o * len + l) * inner + i;
                let m = (0..len).map(|l| src[idx(l)]).fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = (0..len).map(|l| (src[idx(l)] - m).exp()).sum();
                out[o * inner + i] = m + s.ln();
            }
        }
        let value = finite("logsumexp", Tensor::new(reduced_shape(&shape, axis), out)?)?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::LogSumExp { x, outer, len, inner }, ng))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = finite("matmul", self.value(a).matmul(self.value(b))?)?;
        let ng = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).transpose2()?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::Transpose(x), ng))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::Reshape(x), ng))
    }

    /// 1-D tensor of the flat entries of `x` at `indices`.
    pub fn gather(&mut self, x: Var, indices: Vec<usize>) -> Result<Var> {
        let src = self.value(x).data();
        if indices.is_empty() {
            return Err(Error::domain("gather", "empty index list"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.len()) {
            return Err(Error::domain("gather", format!("index {bad} out of range for {} entries", src.len())));
        }
        let value = Tensor::vector(indices.iter().map(|&i| src[i]).collect());
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::Gather(x, indices), ng))
    }

    /// Column `col` of an `N×C` matrix as a length-`N` vector.
    pub fn column(&mut self, x: Var, col: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if col >= cols {
            return Err(Error::Shape(format!("column {col} of a {rows}x{cols} matrix")));
        }
        self.gather(x, (0..rows).map(|r| r * cols + col).collect())
    }

    /// Adds a length-`F` bias to every row of an `N×F` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let b = self.value(bias);
        if b.len() != cols {
            return Err(Error::Shape(format!("bias of length {} for {cols} columns", b.len())));
        }
        let mut data = self.value(x).data().to_vec();
        for r in 0..rows {
            for (v, bv) in data[r * cols..(r + 1) * cols].iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        let value = finite("add_bias", Tensor::new(vec![rows, cols], data)?)?;
        let ng = self.needs(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), ng))
    }

    /// Row-wise `x - logsumexp(x)` of an `N×C` matrix.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let mut data = self.value(x).data().to_vec();
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let value = finite("log_softmax", Tensor::new(vec![rows, cols], data)?)?;
        let ng = self.needs(&[x]);
        Ok(self.push(value, Op::LogSoftmax(x), ng))
    }

    /// Gradients of the scalar `root` with respect to every node on a path
    /// from a differentiable leaf.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if !self.value(root).is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::ones(self.shape(root)));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(node, g, &mut grads)?;
            // keep the root's own gradient visible to callers
            if i == root.0 {
                grads[i] = Some(Tensor::ones(self.shape(root)));
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn backprop(&self, node: &Node, g: Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if self.wants(*b) {
                    self.accumulate(grads, *b, reduce_to(g.clone(), val(*b).shape()));
                }
                self.accumulate(grads, *a, reduce_to(g, val(*a).shape()));
            }
            Op::Sub(a, b) => {
                if self.wants(*b) {
                    self.accumulate(grads, *b, reduce_to(g.scale(-1.0), val(*b).shape()));
                }
                self.accumulate(grads, *a, reduce_to(g, val(*a).shape()));
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let ga = broadcast("mul", &g, val(*b), |x, y| x * y)?;
                    self.accumulate(grads, *a, reduce_to(ga, val(*a).shape()));
                }
                if self.wants(*b) {
                    let gb = broadcast("mul", &g, val(*a), |x, y| x * y)?;
                    self.accumulate(grads, *b, reduce_to(gb, val(*b).shape()));
                }
            }
            Op::Div(a, b) => {
                if self.wants(*a) {
                    let ga = broadcast("div", &g, val(*b), |x, y| x / y)?;
                    self.accumulate(grads, *a, reduce_to(ga, val(*a).shape()));
                }
                if self.wants(*b) {
                    // d(a/b)/db = -out / b
                    let q = broadcast("div", &node.value, val(*b), |o, y| -o / y)?;
                    let gb = g.zip_map(&q, |x, y| x * y)?;
                    self.accumulate(grads, *b, reduce_to(gb, val(*b).shape()));
                }
            }
            Op::Neg(x) => self.accumulate(grads, *x, g.scale(-1.0)),
            Op::Exp(x) => self.accumulate(grads, *x, g.zip_map(&node.value, |a, b| a * b)?),
            Op::Log(x) => self.accumulate(grads, *x, g.zip_map(val(*x), |a, b| a / b)?),
            Op::Relu(x) => self.accumulate(grads, *x, g.zip_map(val(*x), |a, b| if b > 0.0 { a } else { 0.0 })?),
            Op::Sigmoid(x) => self.accumulate(grads, *x, g.zip_map(&node.value, |a, s| a * s * (1.0 - s))?),
            Op::Sqrt(x) => self.accumulate(
                grads,
                *x,
                g.zip_map(&node.value, |a, r| if r > 0.0 { a * 0.5 / r } else { 0.0 })?,
            ),
            Op::Softplus(x) => self.accumulate(grads, *x, g.zip_map(val(*x), |a, v| a * sigmoid(v))?),
            Op::Offset(x) | Op::MaxShift(x) => self.accumulate(grads, *x, g),
            Op::MulConst(x, c) => self.accumulate(grads, *x, broadcast("mul_const", &g, c, |a, b| a * b)?),
            Op::ClampMin(x, lo) => {
                let lo = *lo;
                self.accumulate(grads, *x, g.zip_map(val(*x), |a, v| if v > lo { a } else { 0.0 })?)
            }
            Op::Sum(x) => {
                let s = g.data()[0];
                self.accumulate(grads, *x, Tensor::full(val(*x).shape(), s));
            }
            Op::SumAxis { x, outer, len, inner } => {
                let (outer, len, inner) = (*outer, *len, *inner);
                let mut out = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for l in 0..len {
                        for i in 0..inner {
                            out[(o * len + l) * inner + i] = g.data()[o * inner + i];
                        }
                    }
                }
                self.accumulate(grads, *x, Tensor::new(val(*x).shape().to_vec(), out)?);
            }
            Op::LogSumExp { x, outer, len, inner } => {
                let (outer, len, inner) = (*outer, *len, *inner);
                let src = val(*x).data();
                let mut out = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let lse = node.value.data()[o * inner + i];
                        let go = g.data()[o * inner + i];
                        for l in 0..len {
                            let idx = (o * len + l) * inner + i;
                            out[idx] = go * (src[idx] - lse).exp();
                        }
                    }
                }
                self.accumulate(grads, *x, Tensor::new(val(*x).shape().to_vec(), out)?);
            }
            Op::MatMul(a, b) => {
                let (m, k) = val(*a).dims2()?;
                let (_, n) = val(*b).dims2()?;
                if self.wants(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), Layout::Normal, val(*b).data(), Layout::Transposed, &mut ga, false);
                    self.accumulate(grads, *a, Tensor::new(vec![m, k], ga)?);
                }
                if self.wants(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, val(*a).data(), Layout::Transposed, g.data(), Layout::Normal, &mut gb, false);
                    self.accumulate(grads, *b, Tensor::new(vec![k, n], gb)?);
                }
            }
            Op::Transpose(x) => self.accumulate(grads, *x, g.transpose2()?),
            Op::Reshape(x) => self.accumulate(grads, *x, g.into_reshaped(val(*x).shape())?),
            Op::Gather(x, indices) => {
                let mut out = Tensor::zeros(val(*x).shape());
                let dst = out.data_mut();
                for (&i, gv) in indices.iter().zip(g.data()) {
                    dst[i] += gv;
                }
                self.accumulate(grads, *x, out);
            }
            Op::AddBias(x, bias) => {
                if self.wants(*bias) {
                    let (rows, cols) = g.dims2()?;
                    let mut gb = vec![0.0; cols];
                    for r in 0..rows {
                        for (acc, v) in gb.iter_mut().zip(&g.data()[r * cols..(r + 1) * cols]) {
                            *acc += v;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::new(val(*bias).shape().to_vec(), gb)?);
                }
                self.accumulate(grads, *x, g);
            }
            Op::LogSoftmax(x) => {
                let (rows, cols) = g.dims2()?;
                let mut out = g.data().to_vec();
                for r in 0..rows {
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let total: f64 = gr.iter().sum();
                    let lp = &node.value.data()[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        out[r * cols + c] -= lp[c].exp() * total;
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![rows, cols], out)?);
            }
            Op::Conv2d { input, weight, bias, geom, cols } => {
                self.conv2d_backward(*input, *weight, *bias, geom, cols, &g, grads)?
            }
            Op::MaxPool2d { input, argmax } => {
                let mut out = Tensor::zeros(val(*input).shape());
                let dst = out.data_mut();
                for (&src, gv) in argmax.iter().zip(g.data()) {
                    dst[src] += gv;
                }
                self.accumulate(grads, *input, out);
            }
            Op::BatchNorm { input, gamma, beta, xhat, inv_std, train } => {
                self.batch_norm_backward(*input, *gamma, *beta, xhat, inv_std, *train, &g, grads)?
            }
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests;
