// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `RACT` activation dump: magic, `u16` version, `u32` world count,
//! `u32` neuron count, a `u32`-length-prefixed JSON world block
//! (`{"ids": [...], "attributes": {...}}`), a `u32`-length-prefixed JSON
//! neuron list, then row-major little-endian `f64` values.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActivationMatrix, NeuronId};
use crate::error::{Error, Result};
use crate::reasons::{AttrValue, WorldSet};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RACT";
pub const VERSION: u16 = 1;
const FORMAT: &str = "activation dump";

#[derive(Serialize, Deserialize)]
struct WorldBlock {
    ids: Vec<String>,
    attributes: BTreeMap<String, Vec<AttrValue>>,
}

pub fn encode(m: &ActivationMatrix) -> Result<Vec<u8>> {
    let worlds = serde_json::to_vec(&WorldBlock {
        ids: m.worlds().ids().to_vec(),
        attributes: m.worlds().attributes().clone(),
    })?;
    let neurons = serde_json::to_vec(m.neurons())?;
    let block_len = |b: &[u8]| {
        u32::try_from(b.len()).map_err(|_| Error::InvalidArgument("dump block exceeds 4 GiB".into()))
    };
    let mut out = Vec::with_capacity(26 + worlds.len() + neurons.len() + 8 * m.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n_worlds() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_neurons() as u32).to_le_bytes());
    out.extend_from_slice(&block_len(&worlds)?.to_le_bytes());
    out.extend_from_slice(&worlds);
    out.extend_from_slice(&block_len(&neurons)?.to_le_bytes());
    out.extend_from_slice(&neurons);
    for v in m.values().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::format(
                FORMAT,
                self.at as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.at),
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ActivationMatrix> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::format(FORMAT, 0, "bad magic"));
    }
    let version = u16::from_le_bytes(c.take(2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::format(FORMAT, 4, format!("unsupported version {version}")));
    }
    let n_worlds = c.u32("world count")? as usize;
    let n_neurons = c.u32("neuron count")? as usize;
    let len = c.u32("world block length")? as usize;
    let at = c.at;
    let block: WorldBlock = serde_json::from_slice(c.take(len, "world block")?)
        .map_err(|e| Error::format(FORMAT, at as u64, format!("world block: {e}")))?;
    if block.ids.len() != n_worlds {
        return Err(Error::format(
            FORMAT,
            6,
            format!("header declares {n_worlds} worlds, world block lists {}", block.ids.len()),
        ));
    }
    let invalid = |e: Error| Error::format(FORMAT, at as u64, e.to_string());
    let mut worlds = WorldSet::new(block.ids).map_err(invalid)?;
    for (name, values) in block.attributes {
        worlds.set_attribute(name, values).map_err(invalid)?;
    }
    let len = c.u32("neuron block length")? as usize;
    let at = c.at;
    let neurons: Vec<NeuronId> = serde_json::from_slice(c.take(len, "neuron block")?)
        .map_err(|e| Error::format(FORMAT, at as u64, format!("neuron block: {e}")))?;
    if neurons.len() != n_neurons {
        return Err(Error::format(
            FORMAT,
            10,
            format!("header declares {n_neurons} neurons, neuron block lists {}", neurons.len()),
        ));
    }
    let count = n_worlds
        .checked_mul(n_neurons)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::format(FORMAT, 6, "matrix size overflows"))?;
    let at = c.at;
    let raw = c.take(count, "values")?;
    if c.at != bytes.len() {
        return Err(Error::format(FORMAT, c.at as u64, format!("{} trailing bytes", bytes.len() - c.at)));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(FORMAT, (at + 8 * bad) as u64, "non-finite value"));
    }
    ActivationMatrix::new(worlds, neurons, Tensor::new(vec![n_worlds, n_neurons], values)?)
}

pub fn save(m: &ActivationMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, encode(m)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ActivationMatrix> {
    decode(&std::fs::read(path)?)
}

/// CSV mirror: a `world` column followed by one column per neuron.
pub fn write_csv(m: &ActivationMatrix, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header = vec!["world".to_string()];
    header.extend(m.neurons().iter().map(NeuronId::to_string));
    w.write_record(&header).map_err(map)?;
    for (i, id) in m.worlds().ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(f64::to_string));
        w.write_record(&rec).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}
