// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a patched neuron's activation `a` is rewritten, given its reference
/// mean `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PatchRule {
    /// `mean_coeff·m + act_coeff·a`
    Affine { mean_coeff: f64, act_coeff: f64 },
    /// `m`
    Mean,
    /// `c·m`
    ScaledMean(f64),
}

impl PatchRule {
    pub fn affine(mean_coeff: f64, act_coeff: f64) -> Result<Self> {
        PatchRule::Affine { mean_coeff, act_coeff }.validated()
    }

    pub fn scaled_mean(c: f64) -> Result<Self> {
        PatchRule::ScaledMean(c).validated()
    }

    fn validated(self) -> Result<Self> {
        let finite = match self {
            PatchRule::Affine { mean_coeff, act_coeff } => mean_coeff.is_finite() && act_coeff.is_finite(),
            PatchRule::Mean => true,
            PatchRule::ScaledMean(c) => c.is_finite(),
        };
        if finite {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!("patch rule {self} has non-finite coefficients")))
        }
    }

    pub fn apply(&self, mean: f64, activation: f64) -> f64 {
        match *self {
            PatchRule::Affine { mean_coeff, act_coeff } => mean_coeff * mean + act_coeff * activation,
            PatchRule::Mean => mean,
            PatchRule::ScaledMean(c) => c * mean,
        }
    }
}

impl fmt::Display for PatchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchRule::Affine { mean_coeff, act_coeff } => write!(f, "affine({mean_coeff},{act_coeff})"),
            PatchRule::Mean => f.write_str("mean"),
            PatchRule::ScaledMean(c) => write!(f, "scaled_mean({c})"),
        }
    }
}

/// Parses `affine(1,-3)`, `mean`, `scaled_mean(2)`.
impl FromStr for PatchRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidArgument(format!("cannot parse patch rule `{s}`"));
        if s == "mean" {
            return Ok(PatchRule::Mean);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|a| a.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        match (name, nums.as_slice()) {
            ("affine", &[m, a]) => PatchRule::affine(m, a),
            ("scaled_mean", &[c]) => PatchRule::scaled_mean(c),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for PatchRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PatchRule> for String {
    fn from(r: PatchRule) -> String {
        r.to_string()
    }
}

/// Whether neurons are chosen for speaking most strongly for or against a
/// proposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    For,
    Against,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "for" => Ok(Direction::For),
            "against" => Ok(Direction::Against),
            other => Err(Error::InvalidArgument(format!("direction must be `for` or `against`, got `{other}`"))),
        }
    }
}
