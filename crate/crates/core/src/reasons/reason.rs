// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ops::Add;

use crate::error::{Error, Result};
use crate::reasons::Proposition;

/// A real vector indexed by worlds. Component `k` is the strength with which
/// the reason speaks for world `k` being actual.
#[derive(Clone, Debug, PartialEq)]
pub struct ReasonVector(Vec<f64>);

impl ReasonVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidReason(format!(
                "component {pos} is not finite ({})",
                values[pos]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `+1` on members of `a`, `-1` elsewhere.
    pub fn elementary(a: &Proposition) -> Self {
        Self(a.members().iter().map(|&m| if m { 1.0 } else { -1.0 }).collect())
    }

    /// Componentwise sum. Fails on an empty sequence or mismatched lengths.
    pub fn aggregate<'a, I>(reasons: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ReasonVector>,
    {
        let mut iter = reasons.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Dimension("cannot aggregate an empty sequence".into()))?;
        let mut acc = first.0.clone();
        for r in iter {
            if r.len() != acc.len() {
                return Err(Error::Dimension(format!(
                    "aggregating reasons of length {} and {}",
                    acc.len(),
                    r.len()
                )));
            }
            for (a, b) in acc.iter_mut().zip(&r.0) {
                *a += b;
            }
        }
        Ok(Self(acc))
    }

    /// Worlds with strictly positive components.
    pub fn proposition(&self) -> Proposition {
        Proposition::from_members(self.0.iter().map(|&v| v > 0.0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Adds `c` to every component.
    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Add for &ReasonVector {
    type Output = ReasonVector;

    fn add(self, rhs: &ReasonVector) -> ReasonVector {
        assert_eq!(self.len(), rhs.len(), "reason vectors of different length");
        ReasonVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_reasons() {
        let a = Proposition::from_indices(&[0, 1], 4).unwrap();
        assert_eq!(ReasonVector::elementary(&a).values(), &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(ReasonVector::elementary(&Proposition::full(3)).values(), &[1.0; 3]);
        assert_eq!(ReasonVector::elementary(&Proposition::empty(2)).values(), &[-1.0; 2]);
    }

    #[test]
    fn aggregation() {
        let x = ReasonVector::new(vec![1.0, -1.0]).unwrap();
        let y = ReasonVector::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(ReasonVector::aggregate([&x, &y]).unwrap().values(), &[3.0, 2.0]);
        assert_eq!(ReasonVector::aggregate([&x]).unwrap(), x);
        let z = ReasonVector::zeros(3);
        assert!(matches!(ReasonVector::aggregate([&x, &z]), Err(Error::Dimension(_))));
        assert!(ReasonVector::aggregate(std::iter::empty()).is_err());

        // el_A and el_{A^c} cancel at every index
        let a = Proposition::from_indices(&[1, 3], 5).unwrap();
        let sum = ReasonVector::aggregate([
            &ReasonVector::elementary(&a),
            &ReasonVector::elementary(&a.complement()),
        ])
        .unwrap();
        assert_eq!(sum, ReasonVector::zeros(5));
    }

    #[test]
    fn proposition_of_uses_strict_positivity() {
        let x = ReasonVector::new(vec![1.0, -1.0, 0.5]).unwrap();
        assert_eq!(x.proposition().indices(), vec![0, 2]);
        assert!(ReasonVector::zeros(4).proposition().is_empty());
        let a = Proposition::from_indices(&[2], 3).unwrap();
        assert_eq!(ReasonVector::elementary(&a).proposition().indices(), a.indices());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(ReasonVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(ReasonVector::new(vec![f64::INFINITY, 0.0]).is_err());
    }
}
