// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.

use std::io;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid world set: {0}")]
    InvalidWorlds(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid reason vector: {0}")]
    InvalidReason(String),

    #[error("proposition `{proposition}` is trivial under the belief (b(A) = {mass})")]
    TrivialProposition { proposition: String, mass: f64 },

    #[error("cannot condition on a proposition of probability zero")]
    NullCondition,

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("layer `{layer}`: {detail}")]
    Layer { layer: String, detail: String },

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("unknown neuron {0}")]
    UnknownNeuron(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("training diverged at epoch {epoch} (last good epoch: {last_good:?})")]
    Divergence {
        epoch: usize,
        last_good: Option<usize>,
    },

    #[error("malformed {format} data at byte {offset}: {detail}")]
    Format {
        format: &'static str,
        offset: u64,
        detail: String,
    },

    #[error("missing attribute `{0}`")]
    MissingAttribute(String),

    #[error("csv row {row}, column `{column}`: {detail}")]
    Csv {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("no qualifying inputs: {0}")]
    NoQualifyingInputs(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(format: &'static str, offset: u64, detail: impl Into<String>) -> Self {
        Error::Format {
            format,
            offset,
            detail: detail.into(),
        }
    }
}
