//! Generalized Gell-Mann basis of traceless Hermitian matrices and its
//! structure constants.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// `m = n^2 - 1` Hermitian, traceless matrices with `Tr(X_l X_j) = 2 delta_lj`.
///
/// Ordering: symmetric pairs `(j, k)`, `j < k`, then antisymmetric pairs in
/// the same order, then the diagonal family. For `n = 2` this is
/// `(sigma_x, sigma_y, sigma_z)`.
#[derive(Debug, Clone)]
pub struct SuNBasis {
    n: usize,
    matrices: Vec<CMatrix>,
}

pub fn generalized_gell_mann(n: usize) -> Result<SuNBasis> {
    if n < 2 {
        return Err(Error::InvalidConfig {
            field: "n",
            reason: format!("basis dimension {n} is below 2"),
        });
    }
    let one = C64::new(1.0, 0.0);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| ((j + 1)..n).map(move |k| (j, k)))
        .collect();
    let mut matrices = Vec::with_capacity(n * n - 1);
    for &(j, k) in &pairs {
        let mut x = CMatrix::zeros(n, n);
        x[(j, k)] = one;
        x[(k, j)] = one;
        matrices.push(x);
    }
    for &(j, k) in &pairs {
        let mut x = CMatrix::zeros(n, n);
        x[(j, k)] = -linalg::I;
        x[(k, j)] = linalg::I;
        matrices.push(x);
    }
    for l in 1..n {
        let scale = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut x = CMatrix::zeros(n, n);
        for i in 0..l {
            x[(i, i)] = C64::new(scale, 0.0);
        }
        x[(l, l)] = C64::new(-scale * l as f64, 0.0);
        matrices.push(x);
    }
    Ok(SuNBasis { n, matrices })
}

impl SuNBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of basis matrices, `n^2 - 1`.
    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// Coefficients `tr(X_k A)` for every basis element.
    pub fn traces_with(&self, a: &CMatrix) -> Vec<C64> {
        self.matrices
            .iter()
            .map(|x| linalg::trace_product(x, a))
            .collect()
    }
}

/// `f_ljk = Tr([X_l, X_j] X_k) / 4i` and `g_ljk = Tr({X_l, X_j} X_k) / 4`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    m: usize,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl StructureConstants {
    fn idx(&self, l: usize, j: usize, k: usize) -> usize {
        (l * self.m + j) * self.m + k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn f(&self, l: usize, j: usize, k: usize) -> f64 {
        self.f[self.idx(l, j, k)]
    }

    pub fn g(&self, l: usize, j: usize, k: usize) -> f64 {
        self.g[self.idx(l, j, k)]
    }
}

pub fn structure_constants(basis: &SuNBasis) -> StructureConstants {
    let m = basis.m();
    let x = basis.matrices();
    let mut f = vec![0.0; m * m * m];
    let mut g = vec![0.0; m * m * m];
    for l in 0..m {
        for j in 0..m {
            let prod = &x[l] * &x[j];
            let rev = &x[j] * &x[l];
            let comm = &prod - &rev;
            let anti = &prod + &rev;
            for k in 0..m {
                let i = (l * m + j) * m + k;
                // Tr([X_l, X_j] X_k) is purely imaginary; the real residue is dropped
                f[i] = (linalg::trace_product(&comm, &x[k]) / C64::new(0.0, 4.0)).re;
                g[i] = linalg::trace_product(&anti, &x[k]).re / 4.0;
            }
        }
    }
    StructureConstants { m, f, g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pauli, PauliAxis};

    #[test]
    fn two_level_basis_is_pauli() {
        let b = generalized_gell_mann(2).unwrap();
        let expected = [pauli(PauliAxis::X), pauli(PauliAxis::Y), pauli(PauliAxis::Z)];
        for (x, p) in b.matrices().iter().zip(&expected) {
            assert_eq!(x, p);
        }
    }

    #[test]
    fn orthonormal_traceless_hermitian() {
        for n in 2..=5 {
            let b = generalized_gell_mann(n).unwrap();
            assert_eq!(b.m(), n * n - 1);
            for (l, xl) in b.matrices().iter().enumerate() {
                assert!(linalg::trace(xl).norm() < 1e-12);
                assert_eq!(linalg::hermitian_deviation(xl), 0.0);
                for (j, xj) in b.matrices().iter().enumerate() {
                    let expected = if l == j { 2.0 } else { 0.0 };
                    assert!((linalg::trace_product(xl, xj) - C64::new(expected, 0.0)).norm() < 1e-12);
                }
            }
        }
        assert!(generalized_gell_mann(1).is_err());
    }

    #[test]
    fn pauli_structure_constants() {
        let sc = structure_constants(&generalized_gell_mann(2).unwrap());
        assert!((sc.f(0, 1, 2) - 1.0).abs() < 1e-15);
        assert!((sc.f(1, 0, 2) + 1.0).abs() < 1e-15);
        for l in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(sc.g(l, j, k), 0.0);
                }
            }
        }
    }

    #[test]
    fn symmetries() {
        for n in [3, 4] {
            let sc = structure_constants(&generalized_gell_mann(n).unwrap());
            let m = sc.m();
            for l in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        assert!((sc.f(l, j, k) + sc.f(j, l, k)).abs() < 1e-10);
                        assert!((sc.g(l, j, k) - sc.g(j, l, k)).abs() < 1e-10);
                    }
                    assert_eq!(sc.f(l, l, j), 0.0);
                }
            }
        }
    }
}
