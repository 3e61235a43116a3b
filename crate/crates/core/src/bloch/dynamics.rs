//! Filtering equation in coherent-vector coordinates,
//! `dx = (f(x) + u f_u(x)) dt + g(x) dW`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::basis::{SuNBasis, StructureConstants};
use super::vector::{ball_radius, CoherentVector};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

const TRACE_TOL: f64 = 1e-10;
/// Allowed excess of `|x|` over the ball radius before a step aborts.
pub const BALL_TOL: f64 = 1e-4;

/// Real matrices and vectors of the coherent-vector SDE.
#[derive(Debug, Clone)]
pub struct BlochSuperoperators {
    pub n: usize,
    pub eta: f64,
    pub kappa: f64,
    /// Free Hamiltonian part, `-sum_k f_lrk tr(X_k H0)`.
    pub l_h0: DMatrix<f64>,
    /// Control part, same form with `H_c`.
    pub l_mu: DMatrix<f64>,
    /// Dissipator part for unit rate.
    pub l_d: DMatrix<f64>,
    /// Dissipator offset `tr([L, L^dag] X_l) / n` for unit rate.
    pub f0: DVector<f64>,
    /// `2 Re Gamma`, `2 Im Gamma` with `L = sum_l Gamma_l X_l`.
    pub c1: DVector<f64>,
    pub c2: DVector<f64>,
    /// Linear diffusion part `sum_k g_lrk C1_k + f_lrk C2_k`.
    pub l_w: DMatrix<f64>,
    /// Diffusion offset `2 C1 / n`.
    pub l_w0: DVector<f64>,
    drift_matrix: DMatrix<f64>,
    drift_offset: DVector<f64>,
}

fn hamiltonian_part(h: &CMatrix, basis: &SuNBasis, sc: &StructureConstants) -> DMatrix<f64> {
    let m = basis.m();
    let t = basis.traces_with(h);
    DMatrix::from_fn(m, m, |l, r| -(0..m).map(|k| sc.f(l, r, k) * t[k].re).sum::<f64>())
}

/// Builds the SDE coefficients for Hamiltonian `h0`, control Hamiltonian
/// `mu` and a traceless measurement operator `l`.
pub fn build_superoperators(
    h0: &CMatrix,
    mu: &CMatrix,
    l: &CMatrix,
    basis: &SuNBasis,
    sc: &StructureConstants,
    kappa: f64,
    eta: f64,
) -> Result<BlochSuperoperators> {
    let n = basis.n();
    let m = basis.m();
    for op in [h0, mu, l] {
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.nrows(),
            });
        }
    }
    for op in [h0, mu] {
        let dev = linalg::hermitian_deviation(op);
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
    }
    let tr = linalg::trace(l).norm();
    if tr > TRACE_TOL {
        return Err(Error::TraceComponent(tr));
    }
    if !(0.0..=1.0).contains(&eta) || !(kappa >= 0.0) {
        return Err(Error::InvalidConfig {
            field: "eta",
            reason: format!("need 0 <= eta <= 1 and kappa >= 0, got eta = {eta}, kappa = {kappa}"),
        });
    }

    let x = basis.matrices();
    let ld = l.adjoint();
    let ldl = &ld * l;
    let ldl_tr = basis.traces_with(&ldl);
    let norm = linalg::trace(&ldl).re;
    let inv_n = 1.0 / n as f64;

    let lx: Vec<CMatrix> = x.iter().map(|xr| l * xr * &ld).collect();
    let l_d = DMatrix::from_fn(m, m, |a, r| {
        let jump = 0.5 * linalg::trace_product(&x[a], &lx[r]).re;
        let anti: f64 = (0..m).map(|k| sc.g(a, r, k) * ldl_tr[k].re).sum();
        let diag = if a == r { inv_n * norm } else { 0.0 };
        jump - diag - 0.5 * anti
    });
    let comm = linalg::commutator(l, &ld);
    let f0 = DVector::from_iterator(m, basis.traces_with(&comm).iter().map(|c| c.re * inv_n));

    let gamma: Vec<C64> = basis.traces_with(l).iter().map(|c| c * 0.5).collect();
    let c1 = DVector::from_iterator(m, gamma.iter().map(|g| 2.0 * g.re));
    let c2 = DVector::from_iterator(m, gamma.iter().map(|g| 2.0 * g.im));
    let l_w = DMatrix::from_fn(m, m, |a, r| {
        (0..m).map(|k| sc.g(a, r, k) * c1[k] + sc.f(a, r, k) * c2[k]).sum()
    });
    let l_w0 = &c1 * (2.0 * inv_n);

    let l_h0 = hamiltonian_part(h0, basis, sc);
    let l_mu = hamiltonian_part(mu, basis, sc);
    let drift_matrix = &l_h0 + &l_d * kappa;
    let drift_offset = &f0 * kappa;
    Ok(BlochSuperoperators {
        n,
        eta,
        kappa,
        l_h0,
        l_mu,
        l_d,
        f0,
        c1,
        c2,
        l_w,
        l_w0,
        drift_matrix,
        drift_offset,
    })
}

impl BlochSuperoperators {
    pub fn m(&self) -> usize {
        self.f0.len()
    }

    /// `f(x) + u f_u(x)`.
    pub fn drift(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        let mut out = self.drift_offset.clone();
        out.gemv(1.0, &self.drift_matrix, x, 1.0);
        out.gemv(u, &self.l_mu, x, 1.0);
        out
    }

    /// `sqrt(eta) (L_W x - (C1 . x) x + L_W0)`.
    pub fn diffusion(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = self.l_w0.clone();
        out.gemv(1.0, &self.l_w, x, 1.0);
        out.axpy(-self.c1.dot(x), x, 1.0);
        out * self.eta.sqrt()
    }

    /// Jacobian of [`Self::diffusion`].
    pub fn diffusion_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = self.l_w.clone();
        let s = self.c1.dot(x);
        for i in 0..j.nrows() {
            j[(i, i)] -= s;
        }
        j.ger(-1.0, x, &self.c1, 1.0);
        j * self.eta.sqrt()
    }

    /// Jacobian of the drift at control `u`.
    pub fn drift_jacobian(&self, u: f64) -> DMatrix<f64> {
        &self.drift_matrix + &self.l_mu * u
    }

    /// Euler-Maruyama step without the ball check.
    pub(crate) fn step_in_place(&self, x: &mut DVector<f64>, u: f64, dw: f64, dt: f64) {
        let mut next = self.drift(x, u) * dt;
        next.axpy(dw, &self.diffusion(x), 1.0);
        *x += next;
    }
}

fn check_ball(x: &DVector<f64>, n: usize) -> Result<()> {
    let norm = x.norm();
    let radius = ball_radius(n);
    if !norm.is_finite() || norm > radius + BALL_TOL {
        return Err(Error::BallViolation { norm, radius });
    }
    Ok(())
}

/// One Euler-Maruyama step; fails if the result leaves the state ball.
pub fn bloch_sme_step(
    x: &CoherentVector,
    u: f64,
    dw: f64,
    ops: &BlochSuperoperators,
    dt: f64,
) -> Result<CoherentVector> {
    if x.len() != ops.m() {
        return Err(Error::DimensionMismatch {
            expected: ops.m(),
            got: x.len(),
        });
    }
    let mut next = x.x.clone();
    ops.step_in_place(&mut next, u, dw, dt);
    check_ball(&next, ops.n)?;
    Ok(CoherentVector { x: next })
}

/// Composition of [`bloch_sme_step`] over `controls` and `dws`.
pub fn bloch_multi_step(
    x: &CoherentVector,
    controls: &[f64],
    dws: &[f64],
    ops: &BlochSuperoperators,
    dt: f64,
) -> Result<CoherentVector> {
    if controls.len() != dws.len() {
        return Err(Error::DimensionMismatch {
            expected: controls.len(),
            got: dws.len(),
        });
    }
    let mut cur = x.clone();
    for (&u, &dw) in controls.iter().zip(dws) {
        cur = bloch_sme_step(&cur, u, dw, ops, dt)?;
    }
    Ok(cur)
}
