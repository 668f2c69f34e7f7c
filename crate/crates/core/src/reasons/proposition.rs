// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use crate::error::Result;

/// A set of worlds, stored as a membership mask over a world set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposition {
    members: Vec<bool>,
    origin: Option<String>,
}

impl Proposition {
    pub fn from_members(members: Vec<bool>) -> Self {
        Self {
            members,
            origin: None,
        }
    }

    /// Builds a proposition from world indices; indices must lie in `[0, n)`.
    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        let mut members = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(crate::Error::Dimension(format!(
                    "world index {i} out of range for {n} worlds"
                )));
            }
            members[i] = true;
        }
        Ok(Self::from_members(members))
    }

    pub fn full(n: usize) -> Self {
        Self {
            members: vec![true; n],
            origin: None,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            members: vec![false; n],
            origin: None,
        }
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }

    /// Human-readable name: the origin if present, else the member list.
    pub fn describe(&self) -> String {
        match &self.origin {
            Some(o) => o.clone(),
            None => format!("{:?}", self.indices()),
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            members: self.members.iter().map(|m| !m).collect(),
            origin: self.origin.as_ref().map(|o| {
                o.strip_prefix("not (")
                    .and_then(|s| s.strip_suffix(')'))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("not ({o})"))
            }),
        }
    }

    pub fn contains(&self, world: usize) -> bool {
        self.members.get(world).copied().unwrap_or(false)
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// Number of worlds the proposition is defined over.
    pub fn universe(&self) -> usize {
        self.members.len()
    }

    /// Number of member worlds.
    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn intersect(&self, other: &Proposition) -> Self {
        Self {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a && *b)
                .collect(),
            origin: None,
        }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
