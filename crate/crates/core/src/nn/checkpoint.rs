// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "RLNS"  u16 version  u64 seed
//! u32 input rank, then u32 per input dimension
//! u32 layer count, then per layer:
//!     u16 name length, UTF-8 name, u8 kind tag, kind fields
//!     (Dense: u32 in, u32 out; Conv2d: u32 in, u32 out, u32 kernel;
//!      Dropout: f64 rate; BatchNorm1d: u32 features)
//! per layer in order: parameters, then buffers, as raw f64 arrays
//! ```
//!
//! Array lengths follow from the layer table, so the file must end exactly
//! after the last value.

use std::fs;
use std::path::Path;

use super::layer::{Layer, LayerKind, LayerSpec};
use super::model::Model;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RLNS";
pub const VERSION: u16 = 1;

pub fn encode(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.seed().to_le_bytes());
    out.extend_from_slice(&(model.input_shape().len() as u32).to_le_bytes());
    for &d in model.input_shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for l in model.layers() {
        let name = l.name().as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(l.kind().tag());
        let u = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        match *l.kind() {
            LayerKind::Dense { inputs, outputs } => {
                u(&mut out, inputs);
                u(&mut out, outputs);
            }
            LayerKind::Conv2d { in_channels, out_channels, kernel } => {
                u(&mut out, in_channels);
                u(&mut out, out_channels);
                u(&mut out, kernel);
            }
            LayerKind::Dropout { rate } => out.extend_from_slice(&rate.to_le_bytes()),
            LayerKind::BatchNorm1d { features } => u(&mut out, features),
            _ => {}
        }
    }
    for l in model.layers() {
        for t in l.params.iter().chain(&l.buffers) {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format("checkpoint", self.pos as u64, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.u64(what)?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::format("checkpoint", 0, "bad magic"));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(Error::format("checkpoint", 4, format!("unsupported version {version}")));
    }
    let seed = c.u64("seed")?;
    let rank = c.u32("input rank")?;
    let input_shape = (0..rank).map(|_| c.u32("input shape")).collect::<Result<Vec<_>>>()?;
    let count = c.u32("layer count")?;
    let mut specs = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = c.u16("layer name length")? as usize;
        let at = c.pos;
        let name = std::str::from_utf8(c.take(len, "layer name")?)
            .map_err(|_| Error::format("checkpoint", at as u64, "layer name is not UTF-8"))?
            .to_string();
        let tag_at = c.pos;
        let kind = match c.take(1, "layer kind")?[0] {
            1 => LayerKind::Dense { inputs: c.u32("dense")?, outputs: c.u32("dense")? },
            2 => LayerKind::Relu,
            3 => LayerKind::Conv2d {
                in_channels: c.u32("conv")?,
                out_channels: c.u32("conv")?,
                kernel: c.u32("conv")?,
            },
            4 => LayerKind::MaxPool2d,
            5 => LayerKind::Flatten,
            6 => LayerKind::Dropout { rate: c.f64("dropout rate")? },
            7 => LayerKind::BatchNorm1d { features: c.u32("batch norm")? },
            8 => LayerKind::LogSoftmax,
            9 => LayerKind::Sigmoid,
            t => return Err(Error::format("checkpoint", tag_at as u64, format!("unknown layer kind {t}"))),
        };
        specs.push(LayerSpec::new(name, kind));
    }
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut read = |shapes: Vec<Vec<usize>>| -> Result<Vec<Tensor>> {
            shapes
                .into_iter()
                .map(|shape| {
                    let n: usize = shape.iter().product();
                    let data = (0..n).map(|_| c.f64("parameters")).collect::<Result<Vec<_>>>()?;
                    Tensor::new(shape, data)
                })
                .collect()
        };
        let params = read(spec.kind.param_shapes())?;
        let buffers = read(spec.kind.buffer_shapes())?;
        layers.push(Layer { spec, params, buffers });
    }
    if c.pos != bytes.len() {
        return Err(Error::format(
            "checkpoint",
            c.pos as u64,
            format!("{} trailing bytes", bytes.len() - c.pos),
        ));
    }
    Model::from_layers(&input_shape, layers, seed)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    decode(&fs::read(path)?)
}
