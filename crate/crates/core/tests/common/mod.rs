#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use qsmpc_core::quantum::{DensityMatrix, HermitianOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let a = gaussian_matrix(n, rng);
    HermitianOperator::new((&a + a.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

/// Full-rank state from a Ginibre matrix.
pub fn random_state(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = gaussian_matrix(n, rng);
    let p = &g * g.adjoint();
    let tr = p.trace();
    let mut m = p / tr;
    qsmpc_core::linalg::hermitize(&mut m);
    DensityMatrix::new(m).unwrap()
}

pub fn random_pure_projector(n: usize, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let v = nalgebra::DVector::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    HermitianOperator::pure_projector(&v)
}
