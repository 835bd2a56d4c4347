//! Regular two-level fractional factorial designs.

use crate::combinatorics::Subset;
use crate::design::Assignments;
use crate::error::{param, Result};

/// Defines coordinate `target` as the product of the `sources` coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Generator {
    pub target: usize,
    pub sources: Subset,
}

impl Generator {
    pub fn new(target: usize, sources: &[usize]) -> Self {
        Generator {
            target,
            sources: Subset::from_members(sources),
        }
    }
}

/// Treatment counts with a built-in Resolution V generator set.
pub const RESOLUTION_V_SIZES: [usize; 2] = [5, 8];

/// Minimum-aberration Resolution V generators: `2^{5−1}` with `E = ABCD`,
/// `2^{8−2}` with `G = ABCD`, `H = ABEF`.
pub fn resolution_v_generators(p: usize) -> Option<Vec<Generator>> {
    match p {
        5 => Some(vec![Generator::new(4, &[0, 1, 2, 3])]),
        8 => Some(vec![
            Generator::new(6, &[0, 1, 2, 3]),
            Generator::new(7, &[0, 1, 4, 5]),
        ]),
        _ => None,
    }
}

/// The `2^{p−m}` runs of the fraction defined by `m` generators. Base factors
/// (those not generated) run through a full factorial in standard order, the
/// first base factor alternating fastest and starting at `−1`.
pub fn fractional_design(p: usize, generators: &[Generator]) -> Result<Assignments> {
    if p == 0 || p > crate::combinatorics::MAX_TREATMENTS {
        return param(format!("unsupported number of treatments {p}"));
    }
    let all = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
    let mut targets = 0u64;
    for g in generators {
        if g.target >= p {
            return param(format!("generator target {} is not a treatment", g.target + 1));
        }
        if targets & (1 << g.target) != 0 {
            return param(format!("treatment {} is generated twice", g.target + 1));
        }
        targets |= 1 << g.target;
    }
    let base: Vec<usize> = (0..p).filter(|i| targets >> i & 1 == 0).collect();
    if base.is_empty() {
        return param("every treatment is generated; no base factors remain");
    }
    if base.len() > 30 {
        return param(format!("2^{} runs is too many", base.len()));
    }
    for g in generators {
        if g.sources.is_empty() {
            return param(format!("generator for treatment {} has no sources", g.target + 1));
        }
        if g.sources.mask() & !all != 0 {
            return param(format!("generator for treatment {} uses an unknown treatment", g.target + 1));
        }
        if g.sources.mask() & targets != 0 {
            return param(format!(
                "generator for treatment {} must use base factors only",
                g.target + 1
            ));
        }
    }

    let rows = (0..1u64 << base.len())
        .map(|counter| {
            let mut row = base
                .iter()
                .enumerate()
                .filter(|(bit, _)| counter >> bit & 1 == 1)
                .fold(0u64, |acc, (_, &i)| acc | (1 << i));
            for g in generators {
                if g.sources.parity(row) > 0.0 {
                    row |= 1 << g.target;
                }
            }
            row
        })
        .collect();
    Assignments::from_rows(p, rows)
}
