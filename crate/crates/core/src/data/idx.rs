// SPDX-License-Identifier: MIT OR Apache-2.0

//! The IDX container used by MNIST: a big-endian magic (two zero bytes, a
//! type code, a dimension count), one u32 per dimension, then the payload.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const UNSIGNED_BYTE: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<u32>,
    pub data: Vec<u8>,
}

pub fn read_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::format("idx", bytes.len() as u64, "truncated magic"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::format("idx", 0, "magic must start with two zero bytes"));
    }
    if bytes[2] != UNSIGNED_BYTE {
        return Err(Error::format(
            "idx",
            2,
            format!("unsupported element type 0x{:02x}", bytes[2]),
        ));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(Error::format("idx", 3, "zero dimensions"));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::format("idx", bytes.len() as u64, "truncated dimension list"));
    }
    let dims: Vec<u32> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| Error::format("idx", 4, "dimension product overflows"))?;
    let available = bytes.len() - header;
    if available < count {
        return Err(Error::format(
            "idx",
            bytes.len() as u64,
            format!("payload truncated: expected {count} bytes after header, found {available}"),
        ));
    }
    if available > count {
        return Err(Error::format(
            "idx",
            (header + count) as u64,
            format!("{} trailing bytes", available - count),
        ));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn write_idx(array: &IdxArray) -> Result<Vec<u8>> {
    if array.dims.is_empty() || array.dims.len() > 255 {
        return Err(Error::InvalidArgument("idx needs 1 to 255 dimensions".into()));
    }
    let count: usize = array.dims.iter().map(|&d| d as usize).product();
    if count != array.data.len() {
        return Err(Error::Dimension(format!(
            "dims hold {count} values, payload has {}",
            array.data.len()
        )));
    }
    let mut out = vec![0, 0, UNSIGNED_BYTE, array.dims.len() as u8];
    for d in &array.dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    Ok(out)
}

/// Reads an image file (3 dimensions) and a label file (1 dimension) into a
/// 10-class dataset with inputs `N × 1 × H × W`, pixels divided by 255.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = read_idx(&fs::read(images)?)?;
    let lab = read_idx(&fs::read(labels)?)?;
    if img.dims.len() != 3 {
        return Err(Error::format("idx", 3, format!("image file has {} dimensions, expected 3", img.dims.len())));
    }
    if lab.dims.len() != 1 {
        return Err(Error::format("idx", 3, format!("label file has {} dimensions, expected 1", lab.dims.len())));
    }
    if img.dims[0] != lab.dims[0] {
        return Err(Error::Dimension(format!(
            "{} images but {} labels",
            img.dims[0], lab.dims[0]
        )));
    }
    let (n, h, w) = (img.dims[0] as usize, img.dims[1] as usize, img.dims[2] as usize);
    let pixels = img.data.iter().map(|&p| p as f64 / 255.0).collect();
    let inputs = Tensor::new(vec![n, 1, h, w], pixels)?;
    let labels = lab.data.iter().map(|&l| l as usize).collect();
    Dataset::new(inputs, labels, 10)
}
