//! Designs restricted to a treatment subset `D` (`‖d‖₀ ≤ L`).
//!
//! With `d_i = 0` outside `D` every unit has `x_i = −1` there, so column `S`
//! of the design equals `(−1)^{|S∖D|}` times column `S ∩ D`. Only the reduced
//! coefficients `Γ_D β`, indexed by subsets of `D`, are identifiable.

use nalgebra::DMatrix;

use crate::combinatorics::{Subset, SubsetIndex};
use crate::design::{DesignMatrix, Dosage};
use crate::error::{param, Result};
use crate::estimation::{truncated_ols, EstimationResult};

#[derive(Clone, Debug)]
pub struct CardinalityDesign {
    index: SubsetIndex,
    active: Subset,
    dosage: Dosage,
    /// Full-index columns `S ⊆ D`, in canonical order.
    reduced: Vec<usize>,
    /// For every full column: (reduced position of `S ∩ D`, sign).
    column_map: Vec<(usize, f64)>,
}

impl CardinalityDesign {
    /// Half dosage on `treatments`, zero elsewhere. `limit` is the cardinality
    /// budget `L` the set must respect.
    pub fn new(index: &SubsetIndex, treatments: &[usize], limit: usize) -> Result<Self> {
        if treatments.is_empty() {
            return param("the active treatment set must be non-empty");
        }
        if let Some(&i) = treatments.iter().find(|&&i| i >= index.p()) {
            return param(format!("treatment {} does not exist for p = {}", i + 1, index.p()));
        }
        let active = Subset::from_members(treatments);
        if active.len() > limit {
            return param(format!(
                "{} active treatments exceed the cardinality budget {limit}",
                active.len()
            ));
        }

        let reduced: Vec<usize> = index
            .iter()
            .filter(|(_, s)| s.is_subset_of(active))
            .map(|(j, _)| j)
            .collect();
        let column_map = index
            .subsets()
            .iter()
            .map(|&s| {
                let kept = index
                    .position(s.intersection(active))
                    .expect("subsets of indexed sets are indexed");
                let position = reduced.binary_search(&kept).expect("S ∩ D ⊆ D is reduced");
                let sign = if s.difference(active).len() % 2 == 0 { 1.0 } else { -1.0 };
                (position, sign)
            })
            .collect();
        let dosage = Dosage::new(
            (0..index.p())
                .map(|i| if active.contains(i) { 0.5 } else { 0.0 })
                .collect(),
        )?;
        Ok(CardinalityDesign {
            index: index.clone(),
            active,
            dosage,
            reduced,
            column_map,
        })
    }

    pub fn dosage(&self) -> &Dosage {
        &self.dosage
    }

    pub fn active(&self) -> Subset {
        self.active
    }

    /// Full-index columns that survive the reduction.
    pub fn reduced_columns(&self) -> &[usize] {
        &self.reduced
    }

    /// `(reduced column, sign)` for each full column `S`.
    pub fn column_map(&self) -> &[(usize, f64)] {
        &self.column_map
    }

    /// `Γ_D` as a `K_D × K` matrix of signed one-hot columns.
    pub fn gamma(&self) -> DMatrix<f64> {
        let mut gamma = DMatrix::zeros(self.reduced.len(), self.index.len());
        for (col, &(row, sign)) in self.column_map.iter().enumerate() {
            gamma[(row, col)] = sign;
        }
        gamma
    }

    /// `Γ_D β`, the identifiable part of the coefficients.
    pub fn reduce_beta(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.reduced.len()];
        for (&(row, sign), b) in self.column_map.iter().zip(beta) {
            out[row] += sign * b;
        }
        out
    }

    /// Columns `S ⊆ D` of the full design.
    pub fn reduce_features(&self, design: &DesignMatrix) -> DMatrix<f64> {
        design.features().select_columns(&self.reduced)
    }

    /// Truncated OLS on the reduced design; estimates `Γ_D β`.
    pub fn estimate(&self, design: &DesignMatrix, y: &[f64], bound: f64, sigma: f64) -> Result<EstimationResult> {
        if design.index() != &self.index {
            return param("design uses a different column index");
        }
        truncated_ols(&self.reduce_features(design), y, bound, sigma)
    }
}
