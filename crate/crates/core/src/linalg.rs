//! Small dense complex kernels.
//!
//! Storage is nalgebra's column-major `DMatrix<Complex64>`. The propagators
//! call these kernels millions of times on matrices of dimension 2..=256, so
//! they write into caller-owned buffers instead of allocating.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `out = a * b`.
pub fn matmul_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.nrows();
    debug_assert!(a.ncols() == n && b.nrows() == n && out.nrows() == n);
    let (a, b) = (a.as_slice(), b.as_slice());
    let out = out.as_mut_slice();
    out.fill(ZERO);
    for j in 0..n {
        let col = &mut out[j * n..(j + 1) * n];
        for k in 0..n {
            let bkj = b[k + j * n];
            if bkj == ZERO {
                continue;
            }
            let acol = &a[k * n..(k + 1) * n];
            for (o, &aik) in col.iter_mut().zip(acol) {
                *o += aik * bkj;
            }
        }
    }
}

/// `out = a * b^dagger`.
pub fn matmul_adj_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.nrows();
    let (a, b) = (a.as_slice(), b.as_slice());
    let out = out.as_mut_slice();
    out.fill(ZERO);
    // (a b†)_ij = sum_k a_ik conj(b_jk)
    for j in 0..n {
        let col = &mut out[j * n..(j + 1) * n];
        for k in 0..n {
            let bjk = b[j + k * n].conj();
            if bjk == ZERO {
                continue;
            }
            let acol = &a[k * n..(k + 1) * n];
            for (o, &aik) in col.iter_mut().zip(acol) {
                *o += aik * bjk;
            }
        }
    }
}

/// `out = x + x^dagger`.
pub fn add_adjoint_into(x: &CMatrix, out: &mut CMatrix) {
    let n = x.nrows();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = x[(i, j)] + x[(j, i)].conj();
        }
    }
}

pub fn trace(a: &CMatrix) -> C64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Replace `a` by `(a + a†)/2`.
pub fn hermitize(a: &mut CMatrix) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = C64::new(a[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in j..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn is_diagonal(a: &CMatrix, tol: f64) -> bool {
    let n = a.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || a[(i, j)].norm() <= tol))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            ZERO
        }
    })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `|k><k|` in dimension `n`.
pub fn basis_projector(n: usize, k: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n, n);
    p[(k, k)] = C64::new(1.0, 0.0);
    p
}

/// Coordinate-list operator. Control Hamiltonians such as `J_y` or a Pauli
/// chain have O(n) nonzeros, so products cost O(nnz * n) instead of O(n^3).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseMatrix {
    pub fn from_dense(a: &CMatrix) -> Self {
        let n = a.nrows();
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if a[(i, j)] != ZERO {
                    entries.push((i, j, a[(i, j)]));
                }
            }
        }
        Self { n, entries }
    }

    /// Same sparsity pattern as the union of `parts`, with values
    /// `sum_p coeffs[p] * parts[p]` filled in by [`Self::combine_into`].
    pub fn union_pattern(parts: &[&CMatrix]) -> Self {
        let n = parts[0].nrows();
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if parts.iter().any(|p| p[(i, j)] != ZERO) {
                    entries.push((i, j, ZERO));
                }
            }
        }
        Self { n, entries }
    }

    /// Values of `parts` restricted to this pattern.
    pub fn gather(&self, a: &CMatrix) -> Vec<C64> {
        self.entries.iter().map(|&(i, j, _)| a[(i, j)]).collect()
    }

    /// Overwrites values with `sum_p coeffs[p] * values[p]`.
    pub fn combine_into(&mut self, values: &[&[C64]], coeffs: &[C64]) {
        for (e, entry) in self.entries.iter_mut().enumerate() {
            let mut v = ZERO;
            for (vals, c) in values.iter().zip(coeffs) {
                v += vals[e] * c;
            }
            entry.2 = v;
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut a = CMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            a[(i, j)] += v;
        }
        a
    }

    /// `out = self * x`.
    pub fn mul_left(&self, x: &CMatrix, out: &mut CMatrix) {
        let n = self.n;
        let (x, out) = (x.as_slice(), out.as_mut_slice());
        out.fill(ZERO);
        for &(i, k, v) in &self.entries {
            for j in 0..n {
                out[i + j * n] += v * x[k + j * n];
            }
        }
    }

    /// `out = w * self^dagger`.
    pub fn mul_right_adj(&self, w: &CMatrix, out: &mut CMatrix) {
        let n = self.n;
        let (w, out) = (w.as_slice(), out.as_mut_slice());
        out.fill(ZERO);
        // (w S†)_ij = sum_k w_ik conj(S_jk)
        for &(j, k, v) in &self.entries {
            let v = v.conj();
            let src = &w[k * n..(k + 1) * n];
            let dst = &mut out[j * n..(j + 1) * n];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o += x * v;
            }
        }
    }
}
