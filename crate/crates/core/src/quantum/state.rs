use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

const HERMITIAN_TOL: f64 = 1e-12;
const STATE_HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// A Hermitian operator (Hamiltonian, measurement operator, projector).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL * linalg::max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self { matrix })
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        Self {
            matrix: linalg::diag_real(values),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: linalg::identity(dim),
        }
    }

    /// `|k><k|`.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        Self {
            matrix: linalg::basis_projector(dim, k),
        }
    }

    /// `|psi><psi|` for a normalized `psi`.
    pub fn pure_projector(psi: &DVector<C64>) -> Self {
        let norm = psi.norm();
        let v = psi / C64::new(norm, 0.0);
        Self {
            matrix: &v * v.adjoint(),
        }
    }

    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_diagonal(&self) -> bool {
        linalg::is_diagonal(&self.matrix, 0.0)
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: &self.matrix * C64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// Max-norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &Self) -> f64 {
        linalg::max_abs(&linalg::commutator(&self.matrix, &other.matrix))
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = if self.is_diagonal() {
            (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
        } else {
            SymmetricEigen::new(self.matrix.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect()
        };
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

pub(crate) fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Conditional or averaged quantum state: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-10) and positivity
    /// (smallest eigenvalue >= -1e-8).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        let tr = linalg::trace(&matrix);
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let state = Self { matrix };
        let min_ev = state.min_eigenvalue();
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(state)
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        Self::new(linalg::diag_real(populations))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: linalg::identity(dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn basis_state(dim: usize, k: usize) -> Self {
        Self {
            matrix: linalg::basis_projector(dim, k),
        }
    }

    pub fn pure(psi: &DVector<C64>) -> Self {
        Self {
            matrix: HermitianOperator::pure_projector(psi).into_matrix(),
        }
    }

    /// Wraps a matrix produced by a trace- and Hermiticity-preserving update.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.matrix, &self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Population `Tr(rho P)` for a Hermitian `P`.
    pub fn expectation(&self, op: &HermitianOperator) -> f64 {
        linalg::trace_product(&self.matrix, op.matrix()).re
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator::from_trusted(self.matrix.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian_operator() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).is_ok());
        assert!(matches!(
            DensityMatrix::diagonal(&[0.5, 0.4, 0.3]),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            DensityMatrix::diagonal(&[1.2, -0.2]),
            Err(Error::InvalidState(_))
        ));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(
            DensityMatrix::new(rect),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn maximally_mixed_has_purity_one_over_n() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert!((rho.purity() - 0.25).abs() < 1e-15);
        assert!((rho.min_eigenvalue() - 0.25).abs() < 1e-12);
    }
}
