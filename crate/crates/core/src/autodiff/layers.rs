// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fused layer operations with hand-written vector-Jacobian products.

use super::{finite, Graph, Op, Var};
use crate::error::{Error, Result};
use crate::tensor::{col2im, gemm, im2col, ConvGeometry, Layout, Tensor};

/// Normalization statistics for [`Graph::batch_norm`].
#[derive(Clone, Debug)]
pub enum BatchNormMode<'a> {
    /// Normalize with the batch's own mean and biased variance.
    Batch { eps: f64 },
    /// Normalize with stored running statistics.
    Running { mean: &'a [f64], var: &'a [f64], eps: f64 },
}

/// Batch statistics observed in training mode, for running-average updates.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance.
    pub var: Vec<f64>,
}

impl Graph {
    /// Stride-1 unpadded 2-D convolution of `input` (N×C×H×W) with `weight`
    /// (O×C×k×k) plus per-channel `bias` (O).
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (n, c, h, w) = match *self.shape(input) {
            [n, c, h, w] => (n, c, h, w),
            ref s => return Err(Error::Shape(format!("conv2d input must be N×C×H×W, got {s:?}"))),
        };
        let (o, k) = match *self.shape(weight) {
            [o, ci, k, k2] if ci == c && k == k2 => (o, k),
            ref s => {
                return Err(Error::Shape(format!(
                    "conv2d weight {s:?} incompatible with {c} input channels"
                )))
            }
        };
        if self.value(bias).len() != o {
            return Err(Error::Shape(format!("conv2d bias must have {o} entries")));
        }
        if h < k || w < k {
            return Err(Error::Shape(format!("conv2d kernel {k} larger than input {h}×{w}")));
        }
        let geom = ConvGeometry { batch: n, in_ch: c, height: h, width: w, out_ch: o, kernel: k };
        let cols = im2col(self.value(input).data(), &geom);
        let p = geom.positions();
        // (N·P × Ckk) · (Ckk × O), weight read transposed
        let mut out_mat = vec![0.0; n * p * o];
        gemm(n * p, geom.patch(), o, &cols, Layout::Normal, self.value(weight).data(), Layout::Transposed, &mut out_mat, false);
        let b = self.value(bias).data();
        let mut out = vec![0.0; n * o * p];
        for img in 0..n {
            for pos in 0..p {
                let src = &out_mat[(img * p + pos) * o..(img * p + pos + 1) * o];
                for (ch, v) in src.iter().enumerate() {
                    out[(img * o + ch) * p + pos] = v + b[ch];
                }
            }
        }
        let value = finite("conv2d", Tensor::new(vec![n, o, geom.out_h(), geom.out_w()], out)?)?;
        let ng = self.needs(&[input, weight, bias]);
        Ok(self.push(value, Op::Conv2d { input, weight, bias, geom, cols }, ng))
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn conv2d_backward(
        &self,
        input: Var,
        weight: Var,
        bias: Var,
        geom: &ConvGeometry,
        cols: &[f64],
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        let (n, o, p) = (geom.batch, geom.out_ch, geom.positions());
        let mut g_mat = vec![0.0; n * p * o];
        let gd = g.data();
        for img in 0..n {
            for ch in 0..o {
                let src = &gd[(img * o + ch) * p..(img * o + ch + 1) * p];
                for (pos, v) in src.iter().enumerate() {
                    g_mat[(img * p + pos) * o + ch] = *v;
                }
            }
        }
        if self.wants(bias) {
            let mut gb = vec![0.0; o];
            for row in g_mat.chunks_exact(o) {
                for (acc, v) in gb.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            self.accumulate(grads, bias, Tensor::new(vec![o], gb)?);
        }
        if self.wants(weight) {
            // (O × N·P) · (N·P × Ckk)
            let mut gw = vec![0.0; o * geom.patch()];
            gemm(o, n * p, geom.patch(), &g_mat, Layout::Transposed, cols, Layout::Normal, &mut gw, false);
            self.accumulate(grads, weight, Tensor::new(self.shape(weight).to_vec(), gw)?);
        }
        if self.wants(input) {
            let mut gcols = vec![0.0; n * p * geom.patch()];
            gemm(n * p, o, geom.patch(), &g_mat, Layout::Normal, self.value(weight).data(), Layout::Normal, &mut gcols, false);
            let gx = col2im(&gcols, geom);
            self.accumulate(grads, input, Tensor::new(self.shape(input).to_vec(), gx)?);
        }
        Ok(())
    }

    /// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
    /// Ties go to the lowest flat index in the window.
    pub fn max_pool2d(&mut self, input: Var) -> Result<Var> {
        let (n, c, h, w) = match *self.shape(input) {
            [n, c, h, w] => (n, c, h, w),
            ref s => return Err(Error::Shape(format!("max_pool2d input must be N×C×H×W, got {s:?}"))),
        };
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::Shape(format!("max_pool2d input {h}×{w} too small")));
        }
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for y in 0..oh {
                for x in 0..ow {
                    let mut best = base + 2 * y * w + 2 * x;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * y + dy) * w + 2 * x + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new(vec![n, c, oh, ow], out)?;
        let ng = self.needs(&[input]);
        Ok(self.push(value, Op::MaxPool2d { input, argmax }, ng))
    }

    /// Batch normalization over the rows of an `N×F` matrix.
    ///
    /// In [`BatchNormMode::Batch`] the observed statistics are returned so the
    /// caller can update running averages.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mode: BatchNormMode<'_>,
    ) -> Result<(Var, Option<BatchStats>)> {
        let (rows, feats) = self.value(input).dims2()?;
        if self.value(gamma).len() != feats || self.value(beta).len() != feats {
            return Err(Error::Shape(format!("batch_norm affine parameters must have {feats} entries")));
        }
        let x = self.value(input).data();
        let (mean, var_biased, eps, train) = match mode {
            BatchNormMode::Batch { eps } => {
                let mut mean = vec![0.0; feats];
                for r in 0..rows {
                    for f in 0..feats {
                        mean[f] += x[r * feats + f];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; feats];
                for r in 0..rows {
                    for f in 0..feats {
                        let d = x[r * feats + f] - mean[f];
                        var[f] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= rows as f64);
                (mean, var, eps, true)
            }
            BatchNormMode::Running { mean, var, eps } => {
                if mean.len() != feats || var.len() != feats {
                    return Err(Error::Shape("running statistics have the wrong length".into()));
                }
                (mean.to_vec(), var.to_vec(), eps, false)
            }
        };
        let inv_std: Vec<f64> = var_biased.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let (gm, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; rows * feats];
        let mut out = vec![0.0; rows * feats];
        for r in 0..rows {
            for f in 0..feats {
                let i = r * feats + f;
                xhat[i] = (x[i] - mean[f]) * inv_std[f];
                out[i] = gm[f] * xhat[i] + bt[f];
            }
        }
        let stats = train.then(|| {
            let denom = if rows > 1 { (rows - 1) as f64 } else { 1.0 };
            BatchStats {
                mean: mean.clone(),
                var: var_biased.iter().map(|v| v * rows as f64 / denom).collect(),
            }
        });
        let value = finite("batch_norm", Tensor::new(vec![rows, feats], out)?)?;
        let ng = self.needs(&[input, gamma, beta]);
        let v = self.push(value, Op::BatchNorm { input, gamma, beta, xhat, inv_std, train }, ng);
        Ok((v, stats))
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn batch_norm_backward(
        &self,
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: &[f64],
        inv_std: &[f64],
        train: bool,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        let (rows, feats) = g.dims2()?;
        let gd = g.data();
        let mut sum_g = vec![0.0; feats];
        let mut sum_gx = vec![0.0; feats];
        for r in 0..rows {
            for f in 0..feats {
                let i = r * feats + f;
                sum_g[f] += gd[i];
                sum_gx[f] += gd[i] * xhat[i];
            }
        }
        if self.wants(beta) {
            self.accumulate(grads, beta, Tensor::new(vec![feats], sum_g.clone())?);
        }
        if self.wants(gamma) {
            self.accumulate(grads, gamma, Tensor::new(vec![feats], sum_gx.clone())?);
        }
        if self.wants(input) {
            let gm = self.value(gamma).data();
            let mut gx = vec![0.0; rows * feats];
            let nf = rows as f64;
            for r in 0..rows {
                for f in 0..feats {
                    let i = r * feats + f;
                    gx[i] = if train {
                        gm[f] * inv_std[f] / nf * (nf * gd[i] - sum_g[f] - xhat[i] * sum_gx[f])
                    } else {
                        gm[f] * inv_std[f] * gd[i]
                    };
                }
            }
            self.accumulate(grads, input, Tensor::new(vec![rows, feats], gx)?);
        }
        Ok(())
    }
}
