// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reasons::Proposition;

/// Value of a per-world attribute such as a class label or group flag.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Int(i64),
    Text(String),
}

impl AttrValue {
    /// Parses `"3"` as `Int(3)` and anything else as text.
    pub fn parse(s: &str) -> Self {
        s.trim()
            .parse::<i64>()
            .map(AttrValue::Int)
            .unwrap_or_else(|_| AttrValue::Text(s.to_string()))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            AttrValue::Int(v) => Some(*v),
            AttrValue::Text(_) => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Int(v) => write!(f, "{v}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for AttrValue {
    fn from(v: i64) -> Self {
        AttrValue::Int(v)
    }
}

/// An ordered, finite sample of possible worlds.
///
/// Attributes are stored column-wise, so every attribute is present for all
/// worlds or for none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSet {
    ids: Vec<String>,
    attributes: BTreeMap<String, Vec<AttrValue>>,
}

impl WorldSet {
    pub fn new(ids: Vec<String>) -> Result<Self> {
        if ids.len() < 2 {
            return Err(Error::InvalidWorlds(format!(
                "need at least 2 worlds, got {}",
                ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidWorlds(format!("duplicate world id `{id}`")));
            }
        }
        Ok(Self {
            ids,
            attributes: BTreeMap::new(),
        })
    }

    /// Worlds named `w0 .. w{n-1}`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("w{i}")).collect())
    }

    pub fn with_attribute(mut self, name: impl Into<String>, values: Vec<AttrValue>) -> Result<Self> {
        self.set_attribute(name, values)?;
        Ok(self)
    }

    pub fn set_attribute(&mut self, name: impl Into<String>, values: Vec<AttrValue>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::InvalidWorlds(format!(
                "attribute `{name}` has {} values for {} worlds",
                values.len(),
                self.len()
            )));
        }
        self.attributes.insert(name, values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn attribute(&self, name: &str) -> Result<&[AttrValue]> {
        self.attributes
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingAttribute(name.to_string()))
    }

    pub fn attributes(&self) -> &BTreeMap<String, Vec<AttrValue>> {
        &self.attributes
    }

    /// The proposition "`attribute` = `value`".
    pub fn label_proposition(&self, attribute: &str, value: &AttrValue) -> Result<Proposition> {
        let values = self.attribute(attribute)?;
        let members = values.iter().map(|v| v == value).collect();
        Ok(Proposition::from_members(members).with_origin(format!("{attribute} = {value}")))
    }

    /// Distinct values of an attribute in ascending order.
    pub fn attribute_values(&self, attribute: &str) -> Result<Vec<AttrValue>> {
        let mut values: Vec<AttrValue> = self.attribute(attribute)?.to_vec();
        values.sort();
        values.dedup();
        Ok(values)
    }
}
