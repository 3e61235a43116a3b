//! Operator builders for the spin and qubit-chain models.
//!
//! Basis conventions: spin operators use the `J_z` eigenbasis ordered
//! `m = j, j-1, ..., -j`; qubit registers use the computational basis ordered
//! by bitstring value with qubit 0 as the most significant bit, so `|0...0>`
//! is the first basis vector and `Z|0> = +|0>`.

use std::collections::HashSet;

use num_complex::Complex64 as C64;

use super::state::HermitianOperator;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub jx: HermitianOperator,
    pub jy: HermitianOperator,
    pub jz: HermitianOperator,
}

impl SpinOperators {
    pub fn dim(&self) -> usize {
        self.jz.dim()
    }
}

/// Spin-`j` angular momentum matrices.
pub fn angular_momentum_ops(j: f64) -> Result<SpinOperators> {
    let two_j = 2.0 * j;
    if !(two_j >= 1.0) || (two_j - two_j.round()).abs() > 1e-12 {
        return Err(Error::InvalidSpin(j));
    }
    let dim = two_j.round() as usize + 1;
    let m = |a: usize| j - a as f64;

    // J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, and |m+1> sits one index above |m>.
    let mut jp = CMatrix::zeros(dim, dim);
    for a in 1..dim {
        let ma = m(a);
        jp[(a - 1, a)] = C64::new((j * (j + 1.0) - ma * (ma + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * C64::new(0.5, 0.0);
    let jy = (&jp - &jm) * C64::new(0.0, -0.5);
    let jz = linalg::diag_real(&(0..dim).map(m).collect::<Vec<_>>());

    Ok(SpinOperators {
        jx: HermitianOperator::from_trusted(jx),
        jy: HermitianOperator::from_trusted(jy),
        jz: HermitianOperator::from_trusted(jz),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: PauliAxis) -> CMatrix {
    let o = ZERO;
    let one = C64::new(1.0, 0.0);
    let i = linalg::I;
    match axis {
        PauliAxis::X => CMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        PauliAxis::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        PauliAxis::Z => CMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    }
}

/// `P ⊗ P ⊗ ... ⊗ P` over `n` qubits.
pub fn pauli_chain_product(n: usize, axis: PauliAxis) -> Result<HermitianOperator> {
    if n == 0 {
        return Err(Error::NoQubits);
    }
    let p = pauli(axis);
    let mut acc = p.clone();
    for _ in 1..n {
        acc = linalg::kron(&acc, &p);
    }
    Ok(HermitianOperator::from_trusted(acc))
}

/// Spin value `z_i` of qubit `i` in basis state `b` (qubit 0 most significant).
pub fn z_value(n: usize, b: usize, i: usize) -> f64 {
    if (b >> (n - 1 - i)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `sum_(i,j) J_ij Z_i Z_j + sum_i h_i Z_i`, diagonal in the computational basis.
pub fn ising_hamiltonian(
    n: usize,
    edges: &[(usize, usize, f64)],
    fields: &[f64],
) -> Result<HermitianOperator> {
    if n == 0 {
        return Err(Error::NoQubits);
    }
    if fields.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: fields.len(),
        });
    }
    let mut seen = HashSet::new();
    for &(a, b, _) in edges {
        for idx in [a, b] {
            if idx >= n {
                return Err(Error::SiteOutOfRange { index: idx, n });
            }
        }
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::DuplicateEdge(a, b));
        }
    }
    let dim = 1usize << n;
    let diag: Vec<f64> = (0..dim)
        .map(|b| {
            let zz: f64 = edges
                .iter()
                .map(|&(i, j, jij)| jij * z_value(n, b, i) * z_value(n, b, j))
                .sum();
            let z: f64 = fields
                .iter()
                .enumerate()
                .map(|(i, h)| h * z_value(n, b, i))
                .sum();
            zz + z
        })
        .collect();
    Ok(HermitianOperator::from_real_diagonal(&diag))
}

/// Nearest-neighbour open chain edges with uniform coupling.
pub fn chain_edges(n: usize, coupling: f64) -> Vec<(usize, usize, f64)> {
    (0..n.saturating_sub(1)).map(|i| (i, i + 1, coupling)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, trace};

    fn diag_of(op: &HermitianOperator) -> Vec<f64> {
        (0..op.dim()).map(|i| op.matrix()[(i, i)].re).collect()
    }

    #[test]
    fn spin_one_matches_displayed_matrices() {
        let s = angular_momentum_ops(1.0).unwrap();
        assert_eq!(diag_of(&s.jz), vec![1.0, 0.0, -1.0]);
        let r = 1.0 / 2f64.sqrt();
        let o = ZERO;
        let expected_jy = CMatrix::from_row_slice(
            3,
            3,
            &[
                o,
                C64::new(0.0, -r),
                o,
                C64::new(0.0, r),
                o,
                C64::new(0.0, -r),
                o,
                C64::new(0.0, r),
                o,
            ],
        );
        assert!(max_abs_diff(s.jy.matrix(), &expected_jy) < 1e-15);
    }

    #[test]
    fn spin_half_algebra() {
        let s = angular_momentum_ops(0.5).unwrap();
        assert_eq!(diag_of(&s.jz), vec![0.5, -0.5]);
        let comm = linalg::commutator(s.jx.matrix(), s.jy.matrix());
        let target = s.jz.matrix() * linalg::I;
        assert!(max_abs_diff(&comm, &target) < 1e-12);
    }

    #[test]
    fn spin_commutation_relations_up_to_five() {
        for twice in 1..=10 {
            let s = angular_momentum_ops(twice as f64 / 2.0).unwrap();
            let comm = linalg::commutator(s.jx.matrix(), s.jy.matrix());
            assert!(max_abs_diff(&comm, &(s.jz.matrix() * linalg::I)) <= 1e-10);
            assert!(trace(s.jz.matrix()).norm() < 1e-12);
            assert_eq!(s.dim(), twice + 1);
        }
    }

    #[test]
    fn rejects_non_half_integer_spin() {
        assert!(matches!(angular_momentum_ops(0.3), Err(Error::InvalidSpin(_))));
        assert!(matches!(angular_momentum_ops(0.0), Err(Error::InvalidSpin(_))));
        assert!(matches!(angular_momentum_ops(-1.0), Err(Error::InvalidSpin(_))));
    }

    #[test]
    fn ising_small_cases() {
        let h = ising_hamiltonian(2, &[(0, 1, 1.0)], &[0.0, 0.0]).unwrap();
        assert_eq!(diag_of(&h), vec![1.0, -1.0, -1.0, 1.0]);
        let h = ising_hamiltonian(1, &[], &[0.5]).unwrap();
        assert_eq!(diag_of(&h), vec![0.5, -0.5]);
    }

    #[test]
    fn ising_chain_matches_brute_force_enumeration() {
        let n = 3;
        let h = ising_hamiltonian(n, &chain_edges(n, 1.0), &[0.5; 3]).unwrap();
        // enumerate spin configurations directly: bit = 0 -> +1
        for b in 0..8usize {
            let s: Vec<f64> = (0..n)
                .map(|i| if b & (1 << (n - 1 - i)) == 0 { 1.0 } else { -1.0 })
                .collect();
            let energy = s[0] * s[1] + s[1] * s[2] + 0.5 * (s[0] + s[1] + s[2]);
            assert!((h.matrix()[(b, b)].re - energy).abs() < 1e-15);
        }
        assert!(h.is_diagonal());
    }

    #[test]
    fn ising_errors() {
        assert!(matches!(
            ising_hamiltonian(2, &[(0, 2, 1.0)], &[0.0, 0.0]),
            Err(Error::SiteOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            ising_hamiltonian(3, &[(0, 1, 1.0), (1, 0, 2.0)], &[0.0; 3]),
            Err(Error::DuplicateEdge(1, 0))
        ));
        assert!(matches!(ising_hamiltonian(0, &[], &[]), Err(Error::NoQubits)));
    }

    #[test]
    fn pauli_chains() {
        let z1 = pauli_chain_product(1, PauliAxis::Z).unwrap();
        assert_eq!(diag_of(&z1), vec![1.0, -1.0]);
        let z2 = pauli_chain_product(2, PauliAxis::Z).unwrap();
        assert_eq!(diag_of(&z2), vec![1.0, -1.0, -1.0, 1.0]);
        let y2 = pauli_chain_product(2, PauliAxis::Y).unwrap();
        let sq = y2.matrix() * y2.matrix();
        assert!(max_abs_diff(&sq, &linalg::identity(4)) < 1e-12);
        assert!(matches!(
            pauli_chain_product(0, PauliAxis::X),
            Err(Error::NoQubits)
        ));
    }
}
