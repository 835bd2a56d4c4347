//! Dense symmetric eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{param, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues ascending; column `i` of
/// `vectors` belongs to `values[i]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    Ok(eigh(m).values)
}

/// Checked variant of [`eigh`].
pub fn eigen(m: &DMatrix<f64>) -> Result<Eigen> {
    check_symmetric(m)?;
    Ok(eigh(m))
}

/// Symmetric eigendecomposition; the caller guarantees symmetry.
pub(crate) fn eigh(m: &DMatrix<f64>) -> Eigen {
    let n = m.nrows();
    let decomposition = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[a].total_cmp(&decomposition.eigenvalues[b]));
    let values = order.iter().map(|&i| decomposition.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| decomposition.eigenvectors[(r, order[c])]);
    Eigen { values, vectors }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return param(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols()));
    }
    let scale = m.amax().max(1.0);
    for r in 0..m.nrows() {
        for c in 0..r {
            if (m[(r, c)] - m[(c, r)]).abs() > 1e-10 * scale {
                return param(format!("matrix is not symmetric at ({r}, {c})"));
            }
        }
    }
    Ok(())
}
