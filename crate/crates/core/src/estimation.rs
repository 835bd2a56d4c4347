//! Truncated OLS and OLS+Ridge estimators of the Fourier coefficients.
//!
//! Both estimators eigendecompose `XᵀX` once; the same eigenpairs drive the
//! branch rule and the linear solve.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::design::{eigh, Eigen};
use crate::error::{param, Result};

/// Eigenvalues below `SINGULAR_TOLERANCE · max(1, λ_max)` count as zero.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Ols,
    Ridge,
    Null,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Ols => "ols",
            Branch::Ridge => "ridge",
            Branch::Null => "null",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    pub beta_hat: Vec<f64>,
    pub branch: Branch,
    /// `Σᵢ 1/λᵢ(XᵀX)`, infinite when `XᵀX` is numerically singular.
    pub eigen_sum: f64,
    pub lambda_min: f64,
}

/// Which estimator to fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EstimatorKind {
    #[default]
    TruncatedOls,
    OlsRidge,
}

impl EstimatorKind {
    pub fn fit(self, x: &DMatrix<f64>, y: &[f64], bound: f64, sigma: f64) -> Result<EstimationResult> {
        match self {
            EstimatorKind::TruncatedOls => truncated_ols(x, y, bound, sigma),
            EstimatorKind::OlsRidge => ols_ridge(x, y, bound, sigma),
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" | "truncated_ols" => Ok(EstimatorKind::TruncatedOls),
            "ridge" | "ols_ridge" => Ok(EstimatorKind::OlsRidge),
            other => param(format!("unknown estimator `{other}` (expected ols or ridge)")),
        }
    }
}

struct Normal {
    eigen: Eigen,
    xty: DVector<f64>,
    singular: bool,
    n: usize,
}

impl Normal {
    fn new(x: &DMatrix<f64>, y: &[f64], bound: f64, sigma: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return param(format!("design has {} rows but {} outcomes", x.nrows(), y.len()));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return param("design matrix is empty");
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return param(format!("norm bound must be positive, got {bound}"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return param(format!("noise level must be non-negative, got {sigma}"));
        }
        let eigen = eigh(&x.tr_mul(x));
        let singular = eigen.min() < SINGULAR_TOLERANCE * eigen.max().max(1.0);
        let xty = x.tr_mul(&DVector::from_column_slice(y));
        Ok(Normal {
            eigen,
            xty,
            singular,
            n: x.nrows(),
        })
    }

    fn eigen_sum(&self) -> f64 {
        if self.singular {
            f64::INFINITY
        } else {
            self.eigen.values.iter().map(|l| 1.0 / l).sum()
        }
    }

    /// `(XᵀX + shift·I)⁻¹ XᵀY` through the eigenpairs.
    fn solve(&self, shift: f64) -> Vec<f64> {
        let v = &self.eigen.vectors;
        let mut coords = v.tr_mul(&self.xty);
        for (c, l) in coords.iter_mut().zip(&self.eigen.values) {
            *c /= l + shift;
        }
        (v * coords).iter().copied().collect()
    }

    fn result(&self, beta_hat: Vec<f64>, branch: Branch) -> EstimationResult {
        EstimationResult {
            beta_hat,
            branch,
            eigen_sum: self.eigen_sum(),
            lambda_min: self.eigen.min(),
        }
    }
}

/// OLS when `Σᵢ 1/λᵢ(XᵀX) ≤ B²/σ²`, otherwise the zero vector.
pub fn truncated_ols(x: &DMatrix<f64>, y: &[f64], bound: f64, sigma: f64) -> Result<EstimationResult> {
    let normal = Normal::new(x, y, bound, sigma)?;
    let k = x.ncols();
    let threshold = (bound * bound) / (sigma * sigma);
    if !normal.singular && normal.eigen_sum() <= threshold {
        Ok(normal.result(normal.solve(0.0), Branch::Ols))
    } else {
        Ok(normal.result(vec![0.0; k], Branch::Null))
    }
}

/// OLS when `1/λ_min ≤ B²n / (B²λ_min + Knσ²)`, otherwise ridge with penalty
/// `σ² tr(XᵀX) / (B² λ_min)`. A singular `XᵀX` gives the zero vector, the
/// limit of the divergent penalty.
pub fn ols_ridge(x: &DMatrix<f64>, y: &[f64], bound: f64, sigma: f64) -> Result<EstimationResult> {
    let normal = Normal::new(x, y, bound, sigma)?;
    let k = x.ncols();
    if normal.singular {
        return Ok(normal.result(vec![0.0; k], Branch::Null));
    }
    let lambda_min = normal.eigen.min();
    let b2 = bound * bound;
    let s2 = sigma * sigma;
    let n = normal.n as f64;
    let kn_s2 = k as f64 * n * s2;
    if 1.0 / lambda_min <= b2 * n / (b2 * lambda_min + kn_s2) {
        return Ok(normal.result(normal.solve(0.0), Branch::Ols));
    }
    let trace: f64 = normal.eigen.values.iter().sum();
    let penalty = s2 * trace / (b2 * lambda_min);
    Ok(normal.result(normal.solve(penalty), Branch::Ridge))
}

/// Scales row `m` of `X` and `Y` by `weights[m]` (typically `1/σ_t` for the
/// round the row came from), turning weighted least squares into ordinary
/// least squares with unit noise.
pub fn weight_rows(x: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if weights.len() != x.nrows() || y.len() != x.nrows() {
        return param("weights, outcomes and design rows must have equal length");
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return param(format!("row weights must be positive, got {w}"));
    }
    let mut scaled = x.clone();
    for (m, &w) in weights.iter().enumerate() {
        scaled.row_mut(m).scale_mut(w);
    }
    let y = y.iter().zip(weights).map(|(v, w)| v * w).collect();
    Ok((scaled, y))
}

/// Squared ℓ2 error `‖a − b‖₂²`.
pub fn mse(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len(), "coefficient vectors differ in length");
    estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum()
}
