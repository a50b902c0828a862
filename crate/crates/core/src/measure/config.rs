use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An edge configuration `ω ∈ {0,1}^E`; `bits[e]` is `ω_e`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Config {
    pub bits: Vec<bool>,
}

impl Config {
    pub fn closed(n: usize) -> Self {
        Config {
            bits: vec![false; n],
        }
    }

    pub fn open(n: usize) -> Self {
        Config {
            bits: vec![true; n],
        }
    }

    /// Bit `e` of `mask` is `ω_e`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Config {
            bits: (0..n).map(|e| mask >> e & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        debug_assert!(self.bits.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0, |m, (e, &b)| m | (b as u64) << e)
    }

    /// Character `e` of the string is `ω_e`.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "configuration strings use 0 and 1, found `{other}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Config { bits })
    }

    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn n_open(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

impl std::ops::Index<usize> for Config {
    type Output = bool;

    fn index(&self, e: usize) -> &bool {
        &self.bits[e]
    }
}

/// Values of `ω` on a subset `F` of the edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialConfig {
    assignments: BTreeMap<usize, bool>,
}

impl PartialConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, bool)>) -> Result<Self> {
        let mut p = Self::new();
        for (e, b) in pairs {
            p.insert(e, b)?;
        }
        Ok(p)
    }

    /// The restriction of `omega` to the edges in `mask`.
    pub fn from_masks(support: u64, values: u64) -> Self {
        let assignments = (0..64)
            .filter(|e| support >> e & 1 == 1)
            .map(|e| (e, values >> e & 1 == 1))
            .collect();
        PartialConfig { assignments }
    }

    pub fn insert(&mut self, e: usize, value: bool) -> Result<()> {
        if self.assignments.contains_key(&e) {
            return Err(Error::InvalidParameter(format!("edge {e} assigned twice")));
        }
        self.assignments.insert(e, value);
        Ok(())
    }

    pub fn get(&self, e: usize) -> Option<bool> {
        self.assignments.get(&e).copied()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.assignments.contains_key(&e)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.assignments.iter().map(|(&e, &b)| (e, b))
    }

    pub fn support_mask(&self) -> u64 {
        self.assignments.keys().fold(0, |m, &e| m | 1 << e)
    }

    pub fn value_mask(&self) -> u64 {
        self.iter()
            .filter(|&(_, b)| b)
            .fold(0, |m, (e, _)| m | 1 << e)
    }

    pub(crate) fn check_edges(&self, n: usize) -> Result<()> {
        match self.assignments.keys().find(|&&e| e >= n) {
            Some(e) => Err(Error::InvalidParameter(format!("edge {e} out of range"))),
            None => Ok(()),
        }
    }
}
