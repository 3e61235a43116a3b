use super::state::{same_dim, DensityMatrix, HermitianOperator};
use crate::error::{Error, Result};
use crate::linalg;

const PROJECTOR_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-10;

/// Checks `P^2 = P` and, when `rank_one`, `Tr P = 1`. Returns the rank.
pub fn validate_projector(target: &HermitianOperator, rank_one: bool) -> Result<usize> {
    let sq = target.matrix() * target.matrix();
    let dev = linalg::max_abs_diff(&sq, target.matrix());
    if dev > PROJECTOR_TOL {
        return Err(Error::NotProjector(format!("|P^2 - P| = {dev:.3e}")));
    }
    let tr = target.trace();
    let rank = tr.round();
    if (tr - rank).abs() > PROJECTOR_TOL || rank < 1.0 {
        return Err(Error::NotProjector(format!("trace {tr} is not a positive integer")));
    }
    if rank_one && rank != 1.0 {
        return Err(Error::NotProjector(format!("rank {rank} is not 1")));
    }
    Ok(rank as usize)
}

/// `Tr(rho P)` for a projector of any rank; no validation.
pub(crate) fn overlap(rho: &DensityMatrix, target: &HermitianOperator) -> Result<f64> {
    let v = linalg::trace_product(rho.matrix(), target.matrix());
    if v.im.abs() > IMAG_TOL {
        return Err(Error::InvalidState(format!(
            "Tr(rho P) has imaginary part {:.3e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// Fidelity `Tr(rho P)` to a pure target `P`.
pub fn fidelity(rho: &DensityMatrix, target: &HermitianOperator) -> Result<f64> {
    same_dim(rho.dim(), target.dim())?;
    validate_projector(target, true)?;
    overlap(rho, target)
}

/// Squared Bures distance to a pure state, `2 - 2 Tr(rho P)`.
pub fn bures_sq_to_pure(rho: &DensityMatrix, target: &HermitianOperator) -> Result<f64> {
    Ok(2.0 - 2.0 * fidelity(rho, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::builders::angular_momentum_ops;
    use crate::quantum::spectral::SpectralDecomposition;
    use nalgebra::DVector;
    use num_complex::Complex64 as C64;

    fn random_state(n: usize, seed: u64) -> DensityMatrix {
        // deterministic pseudo-random mixture of pure states
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = linalg::CMatrix::zeros(n, n);
        for _ in 0..3 {
            let v = DVector::from_fn(n, |_, _| C64::new(next(), next()));
            let w = next().abs() + 0.1;
            m += HermitianOperator::pure_projector(&v).matrix() * C64::new(w, 0.0);
        }
        let tr = linalg::trace(&m);
        DensityMatrix::new(m / tr).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).unwrap();
        let target = HermitianOperator::basis_projector(3, 2);
        assert!((fidelity(&rho, &target).unwrap() - 0.3).abs() < 1e-15);
        let pure = DensityMatrix::basis_state(3, 2);
        assert_eq!(fidelity(&pure, &target).unwrap(), 1.0);
        let r = random_state(3, 9);
        assert!((fidelity(&r, &target).unwrap() - r.matrix()[(2, 2)].re).abs() < 1e-15);
    }

    #[test]
    fn bures_examples() {
        let target = HermitianOperator::basis_projector(3, 2);
        assert_eq!(bures_sq_to_pure(&DensityMatrix::basis_state(3, 2), &target).unwrap(), 0.0);
        assert_eq!(bures_sq_to_pure(&DensityMatrix::basis_state(3, 0), &target).unwrap(), 2.0);
        let rho = DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).unwrap();
        assert!((bures_sq_to_pure(&rho, &target).unwrap() - 1.4).abs() < 1e-15);
    }

    #[test]
    fn fidelity_errors() {
        let rho = DensityMatrix::maximally_mixed(3);
        let not_proj = HermitianOperator::from_real_diagonal(&[0.5, 0.5, 0.0]);
        assert!(matches!(fidelity(&rho, &not_proj), Err(Error::NotProjector(_))));
        let rank_two = HermitianOperator::from_real_diagonal(&[1.0, 1.0, 0.0]);
        assert!(matches!(fidelity(&rho, &rank_two), Err(Error::NotProjector(_))));
        assert_eq!(validate_projector(&rank_two, false).unwrap(), 2);
        let small = HermitianOperator::basis_projector(2, 0);
        assert!(matches!(
            fidelity(&rho, &small),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn completeness_over_eigenbasis() {
        let s = angular_momentum_ops(1.0).unwrap();
        let dec = SpectralDecomposition::rank_one(&s.jz);
        for seed in 0..20 {
            let rho = random_state(3, seed);
            let total: f64 = dec
                .projectors()
                .iter()
                .map(|p| fidelity(&rho, p).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-10);
            for p in dec.projectors() {
                let f = fidelity(&rho, p).unwrap();
                assert_eq!(bures_sq_to_pure(&rho, p).unwrap(), 2.0 - 2.0 * f);
            }
        }
    }
}
