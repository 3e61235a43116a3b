use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::basis::SuNBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quantum::{same_dim, DensityMatrix};

/// `x_l = tr(X_l rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentVector {
    pub x: DVector<f64>,
}

/// Radius `sqrt(2(n-1)/n)` of the ball containing every coherent vector.
pub fn ball_radius(n: usize) -> f64 {
    (2.0 * (n as f64 - 1.0) / n as f64).sqrt()
}

impl CoherentVector {
    pub fn norm(&self) -> f64 {
        self.x.norm()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

pub fn rho_to_bloch(rho: &DensityMatrix, basis: &SuNBasis) -> Result<CoherentVector> {
    same_dim(basis.n(), rho.dim())?;
    Ok(CoherentVector {
        x: DVector::from_iterator(basis.m(), basis.traces_with(rho.matrix()).iter().map(|c| c.re)),
    })
}

/// `I/n + (1/2) sum_l x_l X_l`, without a positivity check.
pub fn bloch_to_operator(x: &CoherentVector, basis: &SuNBasis) -> Result<CMatrix> {
    let n = basis.n();
    if x.len() != basis.m() {
        return Err(Error::DimensionMismatch {
            expected: basis.m(),
            got: x.len(),
        });
    }
    let mut rho = linalg::identity(n) / C64::new(n as f64, 0.0);
    for (xl, m) in x.x.iter().zip(basis.matrices()) {
        rho += m * C64::new(0.5 * xl, 0.0);
    }
    Ok(rho)
}

/// Inverse of [`rho_to_bloch`]; fails if the operator is not a valid state.
pub fn bloch_to_rho(x: &CoherentVector, basis: &SuNBasis) -> Result<DensityMatrix> {
    DensityMatrix::new(bloch_to_operator(x, basis)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::basis::generalized_gell_mann;

    #[test]
    fn simple_points() {
        let b2 = generalized_gell_mann(2).unwrap();
        let x = rho_to_bloch(&DensityMatrix::basis_state(2, 0), &b2).unwrap();
        assert_eq!(x.x.as_slice(), &[0.0, 0.0, 1.0]);
        let b3 = generalized_gell_mann(3).unwrap();
        let x = rho_to_bloch(&DensityMatrix::maximally_mixed(3), &b3).unwrap();
        assert!(x.norm() < 1e-15);
        let pure = rho_to_bloch(&DensityMatrix::basis_state(3, 1), &b3).unwrap();
        assert!((pure.norm() - ball_radius(3)).abs() < 1e-12);
        let back = bloch_to_rho(&pure, &b3).unwrap();
        assert!(linalg::max_abs_diff(back.matrix(), DensityMatrix::basis_state(3, 1).matrix()) < 1e-12);
        let bad = CoherentVector { x: DVector::zeros(3) };
        assert!(bloch_to_operator(&bad, &b3).is_err());
    }
}
