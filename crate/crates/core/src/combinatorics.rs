//! Bounded-degree subset enumeration and the parity (Fourier) basis.
//!
//! Treatments are numbered `0..p` in the API. Subsets are bitmasks, so `p`
//! is limited to [`MAX_TREATMENTS`].

use std::collections::HashMap;
use std::fmt;

use itertools::Itertools;

use crate::error::{param, Error, Result};

pub const MAX_TREATMENTS: usize = 63;

/// Hard cap on the number of columns `K`; dense `K x K` work beyond this is
/// out of reach anyway.
pub const MAX_COLUMNS: usize = 1 << 22;

/// A set of treatments, stored as a bitmask (bit `i` set means treatment `i`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_mask(mask: u64) -> Self {
        Subset(mask)
    }

    pub fn from_members(members: &[usize]) -> Self {
        Subset(members.iter().fold(0u64, |acc, &i| acc | (1u64 << i)))
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending member list.
    pub fn members(self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    pub fn symmetric_difference(self, other: Subset) -> Subset {
        Subset(self.0 ^ other.0)
    }

    pub fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn difference(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    /// Parity `φ_S(x)` of an assignment given as a bitmask of treated units
    /// (bit set means `x_i = +1`).
    pub fn parity(self, treated: u64) -> f64 {
        if (self.0 & !treated).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for Subset {
    /// One-based, e.g. `{1,3}`; the empty set prints as `{}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.iter().map(|i| i + 1).join(","))
    }
}

/// `φ_S(x) = Π_{i∈S} x_i` for `x ∈ {−1,+1}^p`.
pub fn phi(subset: Subset, x: &[i8]) -> i8 {
    subset.iter().fold(1i8, |acc, i| acc * x[i])
}

/// Number of subsets of `[p]` with at most `k` members.
pub fn column_count(p: usize, k: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut binom: usize = 1;
    for i in 0..=k.min(p) {
        total = total.checked_add(binom)?;
        // C(p, i+1) = C(p, i) * (p - i) / (i + 1), exact in integers
        binom = binom.checked_mul(p - i)? / (i + 1);
    }
    Some(total)
}

/// Canonical ordering of all subsets `S ⊆ [p]` with `|S| ≤ k`: by size, then
/// lexicographically on the sorted member list. Column 0 is the empty set.
#[derive(Clone, Debug)]
pub struct SubsetIndex {
    p: usize,
    k: usize,
    subsets: Vec<Subset>,
    positions: HashMap<u64, usize>,
}

impl SubsetIndex {
    pub fn new(p: usize, k: usize) -> Result<Self> {
        if p == 0 {
            return param("number of treatments p must be positive");
        }
        if p > MAX_TREATMENTS {
            return param(format!("p = {p} exceeds the supported maximum of {MAX_TREATMENTS}"));
        }
        if k > p {
            return param(format!("interaction order k = {k} exceeds p = {p}"));
        }
        match column_count(p, k) {
            Some(count) if count <= MAX_COLUMNS => {}
            _ => {
                return Err(Error::Capability(format!(
                    "p = {p}, k = {k} yields more than {MAX_COLUMNS} columns"
                )))
            }
        }

        let mut subsets = Vec::new();
        for size in 0..=k {
            for combo in (0..p).combinations(size) {
                subsets.push(Subset::from_members(&combo));
            }
        }
        let positions = subsets
            .iter()
            .enumerate()
            .map(|(j, s)| (s.mask(), j))
            .collect();
        Ok(SubsetIndex {
            p,
            k,
            subsets,
            positions,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `K = Σ_{i≤k} C(p, i)`.
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subset(&self, column: usize) -> Subset {
        self.subsets[column]
    }

    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    pub fn position(&self, subset: Subset) -> Option<usize> {
        self.positions.get(&subset.mask()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Subset)> + '_ {
        self.subsets.iter().copied().enumerate()
    }
}

impl PartialEq for SubsetIndex {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.k == other.k
    }
}

impl Eq for SubsetIndex {}
