//! Dosage selection policies.

mod acquisition;
mod cardinality;
mod emulate;

pub use acquisition::{
    acquire, acquisition_objective, active_dosage, hetero_active_dosage, Acquisition,
    AcquisitionOptions, ExperimentState, Objective, PROXY_THRESHOLD,
};
pub use cardinality::CardinalityDesign;
pub use emulate::{emulate_dosage, kl_divergence, TargetDistribution};

use crate::design::Dosage;
use crate::error::{param, Result};

/// The half dosage, near-optimal for any interaction order when there is no
/// prior data.
pub fn passive_dosage(p: usize) -> Dosage {
    assert!(p >= 1, "at least one treatment is required");
    Dosage::half(p)
}

/// Uniform dosage `L/p` under the supply budget `Σ d_i ≤ L`; the half dosage
/// once it is feasible (`L ≥ p/2`).
///
/// Optimality is established for the additive model (`k = 1`) only; for
/// higher orders it is conjectured from simulation.
pub fn constrained_passive_dosage(p: usize, budget: f64) -> Result<Dosage> {
    if p == 0 {
        return param("at least one treatment is required");
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return param(format!("supply budget must be positive, got {budget}"));
    }
    if budget >= p as f64 / 2.0 {
        return Ok(Dosage::half(p));
    }
    Dosage::uniform(p, budget / p as f64)
}

/// Closed-form `λ_min(Σ(d))` for `k = 1` and the uniform dosage `d_i = L/p`:
/// with `c = 1 − (2L/p − 1)²` and `a = c + 1 + p(1 − c)`,
/// `λ* = (a − √(a² − 4c)) / 2`.
pub fn min_eig_additive_uniform(p: usize, budget: f64) -> Result<f64> {
    let half = p as f64 / 2.0;
    if p == 0 || !(budget > 0.0 && budget <= half) {
        return param(format!("budget must lie in (0, p/2], got L = {budget} for p = {p}"));
    }
    let c = 1.0 - (2.0 * budget / p as f64 - 1.0).powi(2);
    let a = c + 1.0 + p as f64 * (1.0 - c);
    Ok(0.5 * (a - (a * a - 4.0 * c).sqrt()))
}
