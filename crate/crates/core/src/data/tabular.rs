// SPDX-License-Identifier: MIT OR Apache-2.0

//! Census-style CSV ingestion with a thresholded binary label, a protected
//! group column, a seeded train/test split and z-score scaling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::tensor::Tensor;

/// Features with a smaller standard deviation are divided by this instead.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularSpec {
    pub label_column: String,
    /// Label is 1 when the raw value is strictly greater.
    pub threshold: f64,
    pub protected_column: String,
    pub privileged_value: f64,
    /// Keep the protected column among the model inputs.
    pub include_protected: bool,
    pub test_fraction: f64,
    pub seed: u64,
}

impl TabularSpec {
    pub fn new(label_column: &str, threshold: f64, protected_column: &str, privileged_value: f64) -> Self {
        TabularSpec {
            label_column: label_column.into(),
            threshold,
            protected_column: protected_column.into(),
            privileged_value,
            include_protected: true,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Per-feature z-scores; statistics come from the data passed to `fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of each column of an `N × F` tensor.
    pub fn fit(x: &Tensor) -> Result<Self> {
        let (n, f) = x.dims2()?;
        let mut mean = vec![0.0; f];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; f];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, x: &Tensor) -> Result<Tensor> {
        let (n, f) = x.dims2()?;
        if f != self.mean.len() {
            return Err(Error::Dimension(format!(
                "scaler fitted on {} features, got {f}",
                self.mean.len()
            )));
        }
        let mut out = Vec::with_capacity(n * f);
        for i in 0..n {
            for ((v, m), s) in x.row(i).iter().zip(&self.mean).zip(&self.std) {
                out.push((v - m) / s.max(STD_FLOOR));
            }
        }
        Tensor::new(vec![n, f], out)
    }
}

#[derive(Clone, Debug)]
pub struct TabularSplits {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Standardizer,
    pub features: Vec<String>,
    /// Over all rows of the file.
    pub positive_rate: f64,
    /// Over all rows of the file.
    pub privileged_fraction: f64,
}

pub fn load_tabular_csv(path: &Path, spec: &TabularSpec) -> Result<TabularSplits> {
    if !(0.0..1.0).contains(&spec.test_fraction) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {} outside [0, 1)",
            spec.test_fraction
        )));
    }
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingAttribute(name.to_string()))
    };
    let label_col = find(&spec.label_column)?;
    let group_col = find(&spec.protected_column)?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != label_col && (c != group_col || spec.include_protected))
        .collect();

    let mut x = Vec::new();
    let mut labels = Vec::new();
    let mut privileged = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(csv_error)?;
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Csv {
                row,
                column: header[c].clone(),
                detail: format!("`{raw}` is not numeric"),
            })
        };
        for &c in &feature_cols {
            x.push(cell(c)?);
        }
        labels.push((cell(label_col)? > spec.threshold) as usize);
        privileged.push(cell(group_col)? == spec.privileged_value);
    }
    let n = labels.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("{n} data rows; need at least 2")));
    }
    let positive_rate = labels.iter().sum::<usize>() as f64 / n as f64;
    let privileged_fraction = privileged.iter().filter(|&&p| p).count() as f64 / n as f64;
    let all = Dataset::new(Tensor::new(vec![n, feature_cols.len()], x)?, labels, 2)?
        .with_privileged(privileged)?;

    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::stream(spec.seed, tags::SPLIT), &mut order);
    let n_test = ((n as f64) * spec.test_fraction).round() as usize;
    let (test_idx, train_idx) = order.split_at(n_test);
    let raw_train = all.subset(train_idx)?;
    let scaler = Standardizer::fit(raw_train.inputs())?;
    let scale = |d: Dataset, split: &str| -> Result<Dataset> {
        let inputs = scaler.transform(d.inputs())?;
        Dataset::new(inputs, d.labels().to_vec(), 2)?
            .with_privileged(d.privileged().unwrap_or_default().to_vec())
            .map(|d| d.with_split(split))
    };
    let train = scale(raw_train, "train")?;
    let test = if test_idx.is_empty() {
        train.clone().with_split("test")
    } else {
        scale(all.subset(test_idx)?, "test")?
    };
    Ok(TabularSplits {
        train,
        test,
        scaler,
        features: feature_cols.iter().map(|&c| header[c].clone()).collect(),
        positive_rate,
        privileged_fraction,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Csv {
            row,
            column: String::new(),
            detail: format!("{kind:?}"),
        },
    }
}
