// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::reasons::Proposition;

/// Tolerance on the total mass of a belief.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability distribution over a world set.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() < 2 {
            return Err(Error::InvalidBelief(format!(
                "need at least 2 worlds, got {}",
                probabilities.len()
            )));
        }
        if let Some(pos) = probabilities.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidBelief(format!(
                "entry {pos} is {} (must be finite and non-negative)",
                probabilities[pos]
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidBelief(format!("total mass {total} is not 1")));
        }
        Ok(Self(probabilities))
    }

    /// Normalizes non-negative weights into a belief.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidBelief(format!("weights sum to {total}")));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    /// `b(A)`.
    pub fn prob(&self, a: &Proposition) -> f64 {
        self.0
            .iter()
            .zip(a.members())
            .filter(|(_, &m)| m)
            .map(|(p, _)| p)
            .sum()
    }

    /// `b(· | A)`.
    pub fn conditionalize(&self, a: &Proposition) -> Result<Belief> {
        if a.universe() != self.len() {
            return Err(Error::Dimension(format!(
                "proposition over {} worlds, belief over {}",
                a.universe(),
                self.len()
            )));
        }
        let mass = self.prob(a);
        if mass <= 0.0 {
            return Err(Error::NullCondition);
        }
        Ok(Belief(
            self.0
                .iter()
                .zip(a.members())
                .map(|(p, &m)| if m { p / mass } else { 0.0 })
                .collect(),
        ))
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}
