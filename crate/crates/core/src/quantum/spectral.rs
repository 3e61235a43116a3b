//! Spectral decompositions, invariant-subspace gaps, and the subspace
//! Lyapunov function used to monitor state reduction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::state::{same_dim, DensityMatrix, HermitianOperator};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Eigenvalues within this distance are merged into one subspace.
pub const DEGENERACY_TOL: f64 = 1e-9;

const PROJECTOR_TOL: f64 = 1e-10;
const COMMUTE_TOL: f64 = 1e-10;

/// Orthogonal projectors `Pi_a` with `sum Pi_a = I`, each labelled by the
/// eigenvalue of the operator it was built from. Labels are descending for
/// decompositions built from an operator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    projectors: Vec<HermitianOperator>,
}

/// Eigenpairs sorted by descending eigenvalue; the computational basis is
/// used verbatim for diagonal operators so degenerate blocks stay aligned
/// with basis vectors.
fn sorted_eigenpairs(op: &HermitianOperator) -> Vec<(f64, DVector<C64>)> {
    let n = op.dim();
    let mut pairs: Vec<(f64, DVector<C64>)> = if op.is_diagonal() {
        (0..n)
            .map(|i| {
                let mut v = DVector::zeros(n);
                v[i] = C64::new(1.0, 0.0);
                (op.matrix()[(i, i)].re, v)
            })
            .collect()
    } else {
        let eig = SymmetricEigen::new(op.matrix().clone());
        (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

impl SpectralDecomposition {
    /// One rank-1 projector per eigenvector.
    pub fn rank_one(op: &HermitianOperator) -> Self {
        let (eigenvalues, projectors) = sorted_eigenpairs(op)
            .into_iter()
            .map(|(l, v)| (l, HermitianOperator::pure_projector(&v)))
            .unzip();
        Self {
            eigenvalues,
            projectors,
        }
    }

    /// Projectors onto eigenspaces, merging eigenvalues closer than
    /// [`DEGENERACY_TOL`].
    pub fn grouped(op: &HermitianOperator) -> Self {
        let n = op.dim();
        let mut eigenvalues = Vec::new();
        let mut projectors: Vec<CMatrix> = Vec::new();
        let mut last = f64::NAN;
        for (l, v) in sorted_eigenpairs(op) {
            let p = &v * v.adjoint();
            if !projectors.is_empty() && (last - l).abs() <= DEGENERACY_TOL {
                *projectors.last_mut().unwrap() += p;
            } else {
                eigenvalues.push(l);
                projectors.push(CMatrix::zeros(n, n) + p);
            }
            last = l;
        }
        Self {
            eigenvalues,
            projectors: projectors
                .into_iter()
                .map(HermitianOperator::from_trusted)
                .collect(),
        }
    }

    /// A user-supplied family; checks completeness and orthogonality.
    pub fn from_projectors(labels: Vec<f64>, projectors: Vec<HermitianOperator>) -> Result<Self> {
        if labels.len() != projectors.len() || projectors.is_empty() {
            return Err(Error::InvalidDecomposition(
                "one label per projector required".into(),
            ));
        }
        let n = projectors[0].dim();
        let mut sum = CMatrix::zeros(n, n);
        for (a, pa) in projectors.iter().enumerate() {
            same_dim(n, pa.dim())?;
            sum += pa.matrix();
            for (b, pb) in projectors.iter().enumerate() {
                let prod = pa.matrix() * pb.matrix();
                let expected = if a == b {
                    pa.matrix().clone()
                } else {
                    CMatrix::zeros(n, n)
                };
                if linalg::max_abs_diff(&prod, &expected) > PROJECTOR_TOL {
                    return Err(Error::InvalidDecomposition(format!(
                        "projectors {a} and {b} violate Pi_a Pi_b = delta_ab Pi_a"
                    )));
                }
            }
        }
        if linalg::max_abs_diff(&sum, &linalg::identity(n)) > PROJECTOR_TOL {
            return Err(Error::InvalidDecomposition(
                "projectors do not sum to the identity".into(),
            ));
        }
        Ok(Self {
            eigenvalues: labels,
            projectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[HermitianOperator] {
        &self.projectors
    }

    /// `sum_a lambda_a Pi_a`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(n, n), |acc, (l, p)| {
                acc + p.matrix() * C64::new(*l, 0.0)
            })
    }

    /// Subspace populations `p_a = Tr(rho Pi_a)`.
    pub fn populations(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        same_dim(self.dim(), rho.dim())?;
        Ok(self.projectors.iter().map(|p| rho.expectation(p)).collect())
    }
}

/// Gap matrix between invariant subspaces and the reduction rate
/// `r = (eta/2) min_{a != b} gap_ab^2`.
#[derive(Debug, Clone)]
pub struct SubspaceGap {
    pub gaps: DMatrix<f64>,
    pub min_gap: f64,
    pub rate: f64,
}

/// Eigenvalues of `op` restricted to the range of `proj`.
fn restricted_eigenvalues(op: &HermitianOperator, proj: &HermitianOperator) -> Vec<f64> {
    let n = op.dim();
    let basis: Vec<DVector<C64>> = if proj.is_diagonal() {
        (0..n)
            .filter(|&i| proj.matrix()[(i, i)].re > 0.5)
            .map(|i| {
                let mut v = DVector::zeros(n);
                v[i] = C64::new(1.0, 0.0);
                v
            })
            .collect()
    } else {
        let eig = SymmetricEigen::new(proj.matrix().clone());
        (0..n)
            .filter(|&i| eig.eigenvalues[i] > 0.5)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect()
    };
    let r = basis.len();
    let v = CMatrix::from_fn(n, r, |i, c| basis[c][i]);
    let restricted = v.adjoint() * op.matrix() * &v;
    SymmetricEigen::new(restricted)
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

pub fn invariant_subspace_gap(
    l: &HermitianOperator,
    decomposition: &SpectralDecomposition,
    eta: f64,
) -> Result<SubspaceGap> {
    same_dim(l.dim(), decomposition.dim())?;
    if decomposition.len() < 2 {
        return Err(Error::DegenerateDecomposition);
    }
    for (index, p) in decomposition.projectors().iter().enumerate() {
        let norm = l.commutator_norm(p);
        if norm > COMMUTE_TOL {
            return Err(Error::NonCommuting { index, norm });
        }
    }
    let spectra: Vec<Vec<f64>> = decomposition
        .projectors()
        .iter()
        .map(|p| restricted_eigenvalues(l, p))
        .collect();
    let m = spectra.len();
    let mut gaps = DMatrix::zeros(m, m);
    let mut min_gap = f64::INFINITY;
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let g = spectra[a]
                .iter()
                .flat_map(|x| spectra[b].iter().map(move |y| (x - y).abs()))
                .fold(f64::INFINITY, f64::min);
            gaps[(a, b)] = g;
            min_gap = min_gap.min(g);
        }
    }
    Ok(SubspaceGap {
        gaps,
        min_gap,
        rate: 0.5 * eta * min_gap * min_gap,
    })
}

/// `V(rho) = sum_{a<b} sqrt(p_a p_b)`.
pub fn subspace_lyapunov(rho: &DensityMatrix, decomposition: &SpectralDecomposition) -> Result<f64> {
    let pops = decomposition.populations(rho)?;
    lyapunov_from_populations(&pops)
}

pub(crate) fn lyapunov_from_populations(pops: &[f64]) -> Result<f64> {
    if let Some(p) = pops.iter().find(|p| **p < -1e-10) {
        return Err(Error::InvalidState(format!("negative subspace population {p:.3e}")));
    }
    let roots: Vec<f64> = pops.iter().map(|p| p.max(0.0).sqrt()).collect();
    let mut v = 0.0;
    for a in 0..roots.len() {
        for b in (a + 1)..roots.len() {
            v += roots[a] * roots[b];
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::builders::{angular_momentum_ops, pauli_chain_product, PauliAxis};

    #[test]
    fn gap_of_spin_one() {
        let jz = angular_momentum_ops(1.0).unwrap().jz;
        let dec = SpectralDecomposition::rank_one(&jz);
        let gap = invariant_subspace_gap(&jz, &dec, 1.0).unwrap();
        assert!((gap.min_gap - 1.0).abs() < 1e-12);
        assert!((gap.rate - 0.5).abs() < 1e-12);
        assert!((gap.gaps[(0, 2)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gap_of_grouped_zz() {
        let zz = pauli_chain_product(2, PauliAxis::Z).unwrap();
        let dec = SpectralDecomposition::grouped(&zz);
        assert_eq!(dec.len(), 2);
        assert_eq!(dec.eigenvalues(), &[1.0, -1.0]);
        let gap = invariant_subspace_gap(&zz, &dec, 1.0).unwrap();
        assert!((gap.min_gap - 2.0).abs() < 1e-12);
        assert!((gap.rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gap_brute_force_min_pairwise() {
        let values = [3.0, 1.0, 0.0, -2.0];
        let l = HermitianOperator::from_real_diagonal(&values);
        let dec = SpectralDecomposition::rank_one(&l);
        let gap = invariant_subspace_gap(&l, &dec, 0.5).unwrap();
        let mut brute = f64::INFINITY;
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    brute = brute.min((values[a] - values[b]).abs());
                }
            }
        }
        assert_eq!(brute, 1.0);
        assert!((gap.rate - 0.5 * 0.5 * brute * brute).abs() < 1e-12);
    }

    #[test]
    fn gap_errors() {
        let jz = angular_momentum_ops(1.0).unwrap();
        let dec = SpectralDecomposition::rank_one(&jz.jx);
        assert!(matches!(
            invariant_subspace_gap(&jz.jz, &dec, 1.0),
            Err(Error::NonCommuting { .. })
        ));
        let single =
            SpectralDecomposition::from_projectors(vec![0.0], vec![HermitianOperator::identity(3)])
                .unwrap();
        assert!(matches!(
            invariant_subspace_gap(&jz.jz, &single, 1.0),
            Err(Error::DegenerateDecomposition)
        ));
    }

    #[test]
    fn lyapunov_examples() {
        let jz = angular_momentum_ops(1.0).unwrap().jz;
        let dec = SpectralDecomposition::rank_one(&jz);
        let pure = DensityMatrix::basis_state(3, 1);
        assert_eq!(subspace_lyapunov(&pure, &dec).unwrap(), 0.0);
        let half = DensityMatrix::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        assert!((subspace_lyapunov(&half, &dec).unwrap() - 0.5).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(3);
        assert!((subspace_lyapunov(&mixed, &dec).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_operator() {
        let s = angular_momentum_ops(1.5).unwrap();
        let h = s.jx.add(&s.jz.scaled(0.3)).unwrap();
        let dec = SpectralDecomposition::rank_one(&h);
        assert!(linalg::max_abs_diff(&dec.reconstruct(), h.matrix()) < 1e-8);
        let ev = dec.eigenvalues();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn from_projectors_rejects_incomplete_family() {
        let p = HermitianOperator::basis_projector(3, 0);
        assert!(matches!(
            SpectralDecomposition::from_projectors(vec![1.0], vec![p]),
            Err(Error::InvalidDecomposition(_))
        ));
    }
}
