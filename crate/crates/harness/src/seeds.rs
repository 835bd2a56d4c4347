//! Per-trial seed derivation.
//!
//! A seed is a SplitMix64 chain over
//! `(master, experiment id, series, trial, round, stream)`:
//!
//! ```text
//! h = mix(master)
//! h = mix(h ^ fnv1a(experiment id))
//! h = mix(h ^ series); h = mix(h ^ trial); h = mix(h ^ round); h = mix(h ^ stream)
//! ```
//!
//! Every random draw in a trial comes from its own stream, so changing one
//! trial never perturbs another, and parallel execution reproduces the
//! sequential output exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams within one trial and round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Model = 1,
    Dosage = 2,
    Assignment = 3,
    Noise = 4,
    Optimizer = 5,
    Comparator = 6,
}

#[derive(Clone, Copy, Debug)]
pub struct SeedKey<'a> {
    pub master: u64,
    pub experiment: &'a str,
    pub series: u64,
    pub trial: u64,
    pub round: u64,
}

impl SeedKey<'_> {
    pub fn seed(&self, stream: Stream) -> u64 {
        derive_seed(self.master, self.experiment, self.series, self.trial, self.round, stream)
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(stream))
    }
}

pub fn derive_seed(master: u64, experiment: &str, series: u64, trial: u64, round: u64, stream: Stream) -> u64 {
    let mut h = splitmix64(master);
    for word in [fnv1a(experiment), series, trial, round, stream as u64] {
        h = splitmix64(h ^ word);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn stable_values() {
        // frozen so that published runs stay reproducible across releases
        assert_eq!(fnv1a(""), 0xCBF2_9CE4_8422_2325);
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn components_all_matter() {
        let base = derive_seed(7, "passive_sweep", 0, 3, 1, Stream::Noise);
        let variants = [
            derive_seed(8, "passive_sweep", 0, 3, 1, Stream::Noise),
            derive_seed(7, "uniform_sweep", 0, 3, 1, Stream::Noise),
            derive_seed(7, "passive_sweep", 1, 3, 1, Stream::Noise),
            derive_seed(7, "passive_sweep", 0, 4, 1, Stream::Noise),
            derive_seed(7, "passive_sweep", 0, 3, 2, Stream::Noise),
            derive_seed(7, "passive_sweep", 0, 3, 1, Stream::Assignment),
        ];
        let distinct: HashSet<u64> = variants.iter().copied().chain([base]).collect();
        assert_eq!(distinct.len(), variants.len() + 1);
    }
}
