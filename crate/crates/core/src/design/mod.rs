//! Dosages, sampled assignments, design matrices and the expected Gram
//! matrix `Σ(d)`.

mod fractional;
mod spectral;

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;

use crate::combinatorics::{Subset, SubsetIndex};
use crate::error::{param, Result};

pub use fractional::{fractional_design, resolution_v_generators, Generator, RESOLUTION_V_SIZES};
pub use spectral::{eigen, spectrum, Eigen};
pub(crate) use spectral::eigh;

/// Per-treatment probabilities `d ∈ [0,1]^p` of a product Bernoulli
/// assignment distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Dosage(Vec<f64>);

impl Dosage {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return param("dosage must cover at least one treatment");
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return param(format!("dosage entry {i} = {v} is outside [0, 1]"));
        }
        Ok(Dosage(values))
    }

    /// Every treatment at the same level.
    pub fn uniform(p: usize, level: f64) -> Result<Self> {
        Dosage::new(vec![level; p])
    }

    /// `(½, …, ½)`.
    pub fn half(p: usize) -> Self {
        Dosage(vec![0.5; p])
    }

    pub fn p(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn linf_distance(&self, other: &Dosage) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `2d_i − 1`, the mean of coordinate `i` under this dosage.
    pub fn biases(&self) -> Vec<f64> {
        self.0.iter().map(|d| 2.0 * d - 1.0).collect()
    }
}

/// `n` assignments over `p` treatments. Each row is a bitmask of the treated
/// coordinates (bit `i` set means `x_i = +1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignments {
    p: usize,
    rows: Vec<u64>,
}

impl Assignments {
    pub fn from_rows(p: usize, rows: Vec<u64>) -> Result<Self> {
        if p == 0 || p > crate::combinatorics::MAX_TREATMENTS {
            return param(format!("unsupported number of treatments {p}"));
        }
        if let Some(row) = rows.iter().find(|&&r| r >> p != 0) {
            return param(format!("row {row:#b} has bits beyond p = {p}"));
        }
        Ok(Assignments { p, rows })
    }

    pub fn from_signs(rows: &[Vec<i8>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let masks = rows
            .iter()
            .map(|x| crate::model::assignment_mask(x, p))
            .collect::<Result<Vec<_>>>()?;
        Assignments::from_rows(p, masks)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn value(&self, row: usize, treatment: usize) -> i8 {
        if self.rows[row] >> treatment & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn to_signs(&self) -> Vec<Vec<i8>> {
        (0..self.n())
            .map(|m| (0..self.p).map(|i| self.value(m, i)).collect())
            .collect()
    }

    pub fn extend(&mut self, other: &Assignments) {
        assert_eq!(self.p, other.p, "treatment counts differ");
        self.rows.extend_from_slice(&other.rows);
    }

    /// CSV of `±1` integers with header `x1,…,xp`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.p).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for m in 0..self.n() {
            let line: Vec<&str> = (0..self.p)
                .map(|i| if self.value(m, i) == 1 { "1" } else { "-1" })
                .collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Draws `n` independent assignments: coordinate `i` is `+1` with
/// probability `d_i`.
pub fn sample_assignments<R: Rng + ?Sized>(dosage: &Dosage, n: usize, rng: &mut R) -> Assignments {
    let rows = (0..n)
        .map(|_| {
            dosage
                .as_slice()
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &d)| {
                    if rng.random::<f64>() < d {
                        acc | (1u64 << i)
                    } else {
                        acc
                    }
                })
        })
        .collect();
    Assignments {
        p: dosage.p(),
        rows,
    }
}

/// Fourier features `X[m, S] = φ_S(x_m)` alongside the raw assignments.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    assignments: Assignments,
    features: DMatrix<f64>,
    index: SubsetIndex,
}

impl DesignMatrix {
    pub fn new(assignments: Assignments, index: &SubsetIndex) -> Result<Self> {
        if assignments.p() != index.p() {
            return param(format!(
                "assignments have {} treatments, index expects {}",
                assignments.p(),
                index.p()
            ));
        }
        let features = DMatrix::from_fn(assignments.n(), index.len(), |m, j| {
            index.subset(j).parity(assignments.rows[m])
        });
        Ok(DesignMatrix {
            assignments,
            features,
            index: index.clone(),
        })
    }

    pub fn assignments(&self) -> &Assignments {
        &self.assignments
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn index(&self) -> &SubsetIndex {
        &self.index
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    /// `XᵀX`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.features.tr_mul(&self.features)
    }
}

/// `Σ(d)_{S,S'} = Π_{i ∈ SΔS'} (2d_i − 1)`, the expected per-sample Gram
/// matrix `E[XᵀX]/n` under dosage `d`. Unit diagonal, symmetric, PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaMatrix(DMatrix<f64>);

impl SigmaMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn spectrum(&self) -> Vec<f64> {
        eigh(&self.0).values
    }
}

pub fn sigma_of_d(dosage: &Dosage, index: &SubsetIndex) -> Result<SigmaMatrix> {
    if dosage.p() != index.p() {
        return param(format!(
            "dosage has {} entries, index expects {}",
            dosage.p(),
            index.p()
        ));
    }
    Ok(SigmaMatrix(sigma_matrix(&dosage.biases(), index)))
}

/// `Σ(d)` from the biases `y_i = 2d_i − 1`, without validation.
pub(crate) fn sigma_matrix(biases: &[f64], index: &SubsetIndex) -> DMatrix<f64> {
    let k = index.len();
    let subsets = index.subsets();
    let mut out = DMatrix::identity(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let value = bias_product(biases, subsets[a].symmetric_difference(subsets[b]));
            out[(a, b)] = value;
            out[(b, a)] = value;
        }
    }
    out
}

pub(crate) fn bias_product(biases: &[f64], mask: Subset) -> f64 {
    mask.iter().map(|i| biases[i]).product()
}
