//! Probabilistic factorial experimental design.
//!
//! Units receive combinations of `p` binary treatments, each treatment `i`
//! applied independently with probability `d_i` (the *dosage*). Outcomes are
//! modelled as real-valued Boolean functions with interactions of order at
//! most `k`, expressed in the Fourier (parity) basis. The crate provides:
//!
//! * [`combinatorics`]: the canonical column ordering of bounded-degree subsets
//!   and the parity features.
//! * [`model`]: outcome models, basis conversion and a brute-force Fourier oracle.
//! * [`design`]: dosage sampling, design matrices, the expected Gram matrix
//!   `Σ(d)`, spectral utilities and regular fractional factorial designs.
//! * [`estimation`]: truncated OLS and OLS+Ridge estimators.
//! * [`optimize`]: passive, constrained, active and heteroskedastic dosage
//!   selection, limited-cardinality designs and distribution emulation.

pub mod combinatorics;
pub mod design;
pub mod error;
pub mod estimation;
pub mod model;
pub mod optimize;

pub use combinatorics::{phi, Subset, SubsetIndex};
pub use design::{Assignments, DesignMatrix, Dosage, SigmaMatrix};
pub use error::{Error, Result};
pub use estimation::{Branch, EstimationResult};
pub use model::{IndicatorModel, OutcomeModel};
