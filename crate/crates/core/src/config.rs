//! Mutant configurations as fixed-capacity bit sets.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The set of mutant nodes over a population of fixed size.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    words: Vec<u64>,
    len: usize,
    count: usize,
}

impl Configuration {
    pub fn empty(len: usize) -> Self {
        Configuration {
            words: vec![0; len.div_ceil(64)],
            len,
            count: 0,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut c = Self::empty(len);
        for u in 0..len {
            c.insert(u);
        }
        c
    }

    pub fn from_nodes<I: IntoIterator<Item = usize>>(len: usize, nodes: I) -> Self {
        let mut c = Self::empty(len);
        for u in nodes {
            assert!(u < len, "node {u} out of range for {len} nodes");
            c.insert(u);
        }
        c
    }

    /// Bit `i` of `mask` marks node `i` as mutant. Requires `len <= 64`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64);
        let mut c = Self::empty(len);
        if len > 0 {
            let keep = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            c.words[0] = mask & keep;
            c.count = c.words[0].count_ones() as usize;
        }
        c
    }

    /// The configuration as an integer mask, if it fits.
    pub fn mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Population size.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Number of mutants.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn contains(&self, u: usize) -> bool {
        self.words[u >> 6] >> (u & 63) & 1 == 1
    }

    /// Returns true if the node was newly inserted.
    #[inline]
    pub fn insert(&mut self, u: usize) -> bool {
        self.set(u, true)
    }

    #[inline]
    pub fn remove(&mut self, u: usize) -> bool {
        self.set(u, false)
    }

    /// Sets membership of `u`; returns whether it changed.
    #[inline]
    pub fn set(&mut self, u: usize, mutant: bool) -> bool {
        let word = &mut self.words[u >> 6];
        let bit = 1u64 << (u & 63);
        let was = *word & bit != 0;
        if was == mutant {
            return false;
        }
        if mutant {
            *word |= bit;
            self.count += 1;
        } else {
            *word &= !bit;
            self.count -= 1;
        }
        true
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.count == self.len
    }

    /// Absorbing iff no mutants or only mutants.
    #[inline]
    pub fn is_absorbing(&self) -> bool {
        self.count == 0 || self.count == self.len
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn is_subset(&self, other: &Configuration) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &Configuration) -> Configuration {
        self.combine(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Configuration) -> Configuration {
        self.combine(other, |a, b| a & b)
    }

    fn combine(&self, other: &Configuration, op: impl Fn(u64, u64) -> u64) -> Configuration {
        assert_eq!(self.len, other.len);
        let words: Vec<u64> = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| op(a, b))
            .collect();
        let count = words.iter().map(|w| w.count_ones() as usize).sum();
        Configuration {
            words,
            len: self.len,
            count,
        }
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
