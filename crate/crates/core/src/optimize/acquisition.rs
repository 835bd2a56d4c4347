//! Active dosage acquisition.
//!
//! Round `T` picks the dosage minimizing `Σᵢ 1/λᵢ(Σ(d) + P)` (or the cheaper
//! `1/λ_min(Σ(d) + P)`), where `P = (1/n) Σ_{t<T} X_tᵀX_t` is the Gram mass
//! already collected. The minimization is a multi-start projected gradient
//! descent over `[0,1]^p`, optionally intersected with `Σ d_i ≤ L`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::SubsetIndex;
use crate::design::{eigh, sigma_matrix, DesignMatrix, Dosage, Eigen};
use crate::error::{param, Result};

/// From this many treatments on, [`AcquisitionOptions::for_treatments`]
/// selects the min-eigenvalue proxy.
pub const PROXY_THRESHOLD: usize = 15;

/// Below this eigenvalue gap the proxy gradient falls back to finite
/// differences.
const EIGEN_GAP: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const STATIONARY: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// `Σᵢ 1/λᵢ(M)`.
    EigenSum,
    /// `1/λ_min(M)`.
    MinEigProxy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionOptions {
    pub objective: Objective,
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once one step lowers the objective by less than this.
    pub tol: f64,
    /// Optional supply budget `Σ d_i ≤ L`.
    pub budget: Option<f64>,
    /// Seed for the random restart points.
    pub seed: u64,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        AcquisitionOptions {
            objective: Objective::EigenSum,
            restarts: 5,
            max_iters: 500,
            tol: 1e-6,
            budget: None,
            seed: 0,
        }
    }
}

impl AcquisitionOptions {
    /// Defaults, with the proxy objective for `p ≥ PROXY_THRESHOLD`.
    pub fn for_treatments(p: usize) -> Self {
        let objective = if p >= PROXY_THRESHOLD {
            Objective::MinEigProxy
        } else {
            Objective::EigenSum
        };
        AcquisitionOptions {
            objective,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return param(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.restarts == 0 {
            return param("at least one restart is required");
        }
        if let Some(budget) = self.budget {
            if !(budget > 0.0 && budget.is_finite()) {
                return param(format!("supply budget must be positive, got {budget}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct RoundRecord {
    gram: DMatrix<f64>,
    sigma: f64,
}

/// Gram mass accumulated over completed rounds.
#[derive(Clone, Debug)]
pub struct ExperimentState {
    index: SubsetIndex,
    n_per_round: usize,
    rounds: Vec<RoundRecord>,
}

impl ExperimentState {
    pub fn new(index: SubsetIndex, n_per_round: usize) -> Result<Self> {
        if n_per_round == 0 {
            return param("rounds must contain at least one unit");
        }
        Ok(ExperimentState {
            index,
            n_per_round,
            rounds: Vec::new(),
        })
    }

    pub fn index(&self) -> &SubsetIndex {
        &self.index
    }

    pub fn n_per_round(&self) -> usize {
        self.n_per_round
    }

    /// Number of completed rounds.
    pub fn rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Adds a completed round observed with noise level `sigma`.
    pub fn record_round(&mut self, design: &DesignMatrix, sigma: f64) -> Result<()> {
        if design.index() != &self.index {
            return param("round design uses a different column index");
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return param(format!("round noise level must be positive, got {sigma}"));
        }
        self.rounds.push(RoundRecord {
            gram: design.gram(),
            sigma,
        });
        Ok(())
    }

    /// `P = (1/n) Σ_t X_tᵀX_t`; zero before the first round.
    pub fn prior(&self) -> DMatrix<f64> {
        self.combine(|_| 1.0)
    }

    /// `(1/n) Σ_t (σ_next²/σ_t²) X_tᵀX_t`: the heteroskedastic prior
    /// normalized so that the new round enters with unit weight.
    pub fn weighted_prior(&self, sigma_next: f64) -> DMatrix<f64> {
        self.combine(|r| (sigma_next / r.sigma).powi(2))
    }

    fn combine(&self, weight: impl Fn(&RoundRecord) -> f64) -> DMatrix<f64> {
        let k = self.index.len();
        let mut total = DMatrix::zeros(k, k);
        for round in &self.rounds {
            total += &round.gram * weight(round);
        }
        total / self.n_per_round as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub dosage: Dosage,
    pub objective: f64,
    /// Objective at the (projected) half dosage, always a candidate.
    pub half_objective: f64,
    /// False when the winning descent hit `max_iters`.
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
}

/// Next-round dosage for an experiment with homoskedastic noise.
pub fn active_dosage(state: &ExperimentState, opts: &AcquisitionOptions) -> Result<Acquisition> {
    acquire(state.index(), &state.prior(), opts)
}

/// Next-round dosage when round `t` had noise level `σ_t` and the next round
/// will have `sigma_next`. Minimizes
/// `Σᵢ 1/λᵢ(Σ(d)/σ_next² + (1/n) Σ_t X_tᵀX_t/σ_t²)` through its positive
/// rescaling by `σ_next²`.
pub fn hetero_active_dosage(
    state: &ExperimentState,
    sigma_next: f64,
    opts: &AcquisitionOptions,
) -> Result<Acquisition> {
    if !(sigma_next > 0.0 && sigma_next.is_finite()) {
        return param(format!("noise level must be positive, got {sigma_next}"));
    }
    acquire(state.index(), &state.weighted_prior(sigma_next), opts)
}

/// Objective value at `dosage`; `+∞` when `Σ(d) + P` is singular.
pub fn acquisition_objective(
    index: &SubsetIndex,
    prior: &DMatrix<f64>,
    dosage: &Dosage,
    objective: Objective,
) -> Result<f64> {
    let problem = Problem::new(index, prior, objective, None)?;
    if dosage.p() != index.p() {
        return param("dosage length does not match the index");
    }
    Ok(problem.value(dosage.as_slice()))
}

/// Minimizes the acquisition objective over feasible dosages given prior
/// Gram mass `prior`.
pub fn acquire(index: &SubsetIndex, prior: &DMatrix<f64>, opts: &AcquisitionOptions) -> Result<Acquisition> {
    opts.validate()?;
    let problem = Problem::new(index, prior, opts.objective, opts.budget)?;
    let p = index.p();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![problem.project(&vec![0.5; p])];
    for _ in 1..opts.restarts {
        let point: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        starts.push(problem.project(&point));
    }

    let half_objective = problem.value(&starts[0]);
    let mut best: Option<(Descent, usize)> = None;
    for (restart, start) in starts.into_iter().enumerate() {
        let run = problem.descend(start, opts.max_iters, opts.tol);
        let better = match &best {
            None => true,
            Some((incumbent, _)) => run.value < incumbent.value,
        };
        if better {
            best = Some((run, restart));
        }
    }
    let (run, restart) = best.expect("at least one restart");
    Ok(Acquisition {
        dosage: Dosage::new(run.point)?,
        objective: run.value,
        half_objective,
        converged: run.converged,
        iterations: run.iterations,
        restart,
    })
}

struct Descent {
    point: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

struct Problem<'a> {
    index: &'a SubsetIndex,
    prior: &'a DMatrix<f64>,
    objective: Objective,
    budget: Option<f64>,
    /// `(a, b, members of S_a Δ S_b)` for every off-diagonal pair `a < b`.
    pairs: Vec<(usize, usize, Vec<usize>)>,
}

impl<'a> Problem<'a> {
    fn new(
        index: &'a SubsetIndex,
        prior: &'a DMatrix<f64>,
        objective: Objective,
        budget: Option<f64>,
    ) -> Result<Self> {
        let k = index.len();
        if prior.nrows() != k || prior.ncols() != k {
            return param(format!(
                "prior Gram matrix is {}x{}, expected {k}x{k}",
                prior.nrows(),
                prior.ncols()
            ));
        }
        let subsets = index.subsets();
        let mut pairs = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for a in 0..k {
            for b in (a + 1)..k {
                pairs.push((a, b, subsets[a].symmetric_difference(subsets[b]).members()));
            }
        }
        Ok(Problem {
            index,
            prior,
            objective,
            budget,
            pairs,
        })
    }

    fn eigen(&self, d: &[f64]) -> Eigen {
        let biases: Vec<f64> = d.iter().map(|v| 2.0 * v - 1.0).collect();
        eigh(&(sigma_matrix(&biases, self.index) + self.prior))
    }

    fn positive(e: &Eigen) -> bool {
        e.min() > 1e-12 * e.max().max(1.0)
    }

    fn value_of(&self, e: &Eigen) -> f64 {
        if !Self::positive(e) {
            return f64::INFINITY;
        }
        match self.objective {
            Objective::EigenSum => e.values.iter().map(|l| 1.0 / l).sum(),
            Objective::MinEigProxy => 1.0 / e.min(),
        }
    }

    fn value(&self, d: &[f64]) -> f64 {
        self.value_of(&self.eigen(d))
    }

    fn value_and_gradient(&self, d: &[f64]) -> (f64, Vec<f64>) {
        let e = self.eigen(d);
        let value = self.value_of(&e);
        if !value.is_finite() {
            return (value, vec![0.0; d.len()]);
        }
        let k = e.values.len();
        // gradient = −Σ_{S≠S'} W_{S,S'} ∂Σ_{S,S'}/∂d_j for the weight matrix W
        let weights = match self.objective {
            Objective::EigenSum => {
                // d tr(M⁻¹) = −tr(M⁻² dM), valid for repeated eigenvalues too
                let mut scaled = e.vectors.clone();
                for (c, l) in e.values.iter().enumerate() {
                    scaled.column_mut(c).scale_mut(1.0 / (l * l));
                }
                scaled * e.vectors.transpose()
            }
            Objective::MinEigProxy => {
                if k > 1 && e.values[1] - e.values[0] < EIGEN_GAP {
                    return (value, self.finite_difference(d));
                }
                let v = e.vectors.column(0);
                let l = e.values[0];
                (v * v.transpose()) / (l * l)
            }
        };
        (value, self.contract(d, &weights))
    }

    /// `−Σ_{a≠b} W_ab ∂Σ_ab/∂d_j`, where `∂Σ_ab/∂d_j = 2 Π_{l ∈ S_aΔS_b, l≠j} (2d_l − 1)`
    /// when `j ∈ S_aΔS_b` and zero otherwise.
    fn contract(&self, d: &[f64], weights: &DMatrix<f64>) -> Vec<f64> {
        let biases: Vec<f64> = d.iter().map(|v| 2.0 * v - 1.0).collect();
        let mut grad = vec![0.0; d.len()];
        for (a, b, members) in &self.pairs {
            let w = weights[(*a, *b)];
            if w == 0.0 {
                continue;
            }
            for (pos, &j) in members.iter().enumerate() {
                let others: f64 = members
                    .iter()
                    .enumerate()
                    .filter(|(q, _)| *q != pos)
                    .map(|(_, &l)| biases[l])
                    .product();
                // symmetric pair counted twice, derivative factor 2
                grad[j] -= 4.0 * w * others;
            }
        }
        grad
    }

    fn finite_difference(&self, d: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; d.len()];
        let mut probe = d.to_vec();
        for j in 0..d.len() {
            let lo = (d[j] - FD_STEP).max(0.0);
            let hi = (d[j] + FD_STEP).min(1.0);
            probe[j] = hi;
            let up = self.value(&probe);
            probe[j] = lo;
            let down = self.value(&probe);
            probe[j] = d[j];
            grad[j] = if up.is_finite() && down.is_finite() {
                (up - down) / (hi - lo)
            } else {
                0.0
            };
        }
        grad
    }

    /// Euclidean projection onto `[0,1]^p ∩ {Σ d_i ≤ L}`.
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let clamp = |shift: f64| -> Vec<f64> { x.iter().map(|v| (v - shift).clamp(0.0, 1.0)).collect() };
        let boxed = clamp(0.0);
        let Some(budget) = self.budget else {
            return boxed;
        };
        if boxed.iter().sum::<f64>() <= budget {
            return boxed;
        }
        // Σ clamp(x − τ) is non-increasing in τ; bisect for the budget
        let (mut lo, mut hi) = (0.0, x.iter().copied().fold(f64::MIN, f64::max));
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if clamp(mid).iter().sum::<f64>() > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clamp(hi)
    }

    fn descend(&self, start: Vec<f64>, max_iters: usize, tol: f64) -> Descent {
        let mut x = start;
        let (mut f, mut g) = self.value_and_gradient(&x);
        if !f.is_finite() {
            return Descent {
                point: x,
                value: f,
                converged: false,
                iterations: 0,
            };
        }
        let mut step = 0.1 / inf_norm(&g).max(1e-12);
        for iteration in 1..=max_iters {
            let full: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect();
            let stationarity = inf_norm(&diff(&self.project(&full), &x));
            if stationarity < STATIONARY {
                return Descent {
                    point: x,
                    value: f,
                    converged: true,
                    iterations: iteration - 1,
                };
            }

            let accepted = loop {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
                let candidate = self.project(&trial);
                let moved = diff(&candidate, &x);
                if inf_norm(&moved) == 0.0 {
                    break None;
                }
                let predicted: f64 = g.iter().zip(&moved).map(|(gi, mi)| gi * mi).sum();
                let value = self.value(&candidate);
                if value <= f + ARMIJO * predicted {
                    break Some((candidate, value));
                }
                step *= 0.5;
            };
            let Some((candidate, value)) = accepted else {
                return Descent {
                    point: x,
                    value: f,
                    converged: true,
                    iterations: iteration,
                };
            };

            let decrease = f - value;
            x = candidate;
            (f, g) = self.value_and_gradient(&x);
            if decrease < tol {
                return Descent {
                    point: x,
                    value: f,
                    converged: true,
                    iterations: iteration,
                };
            }
            step *= 2.0;
        }
        Descent {
            point: x,
            value: f,
            converged: false,
            iterations: max_iters,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
