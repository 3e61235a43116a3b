//! Averaged (Lindblad) dynamics and the backward costate.
//!
//! Within a substep the control is constant, so the generator `A_u` is
//! linear and one RK4 step equals the degree-4 Taylor polynomial
//! `P(hA) = sum_{m<=4} (hA)^m / m!`. Both propagators are written in that
//! form; it lets the horizon optimizer differentiate the discrete map exactly.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, SparseMatrix, ZERO};
use crate::model::ModelConfig;
use crate::pmp::ControlSchedule;
use crate::quantum::{same_dim, DensityMatrix, HermitianOperator};

/// Taylor weights `h^m / m!` for `m = 0..=4`.
pub(crate) fn taylor_weights(h: f64) -> [f64; 5] {
    [1.0, h, h * h / 2.0, h * h * h / 6.0, h * h * h * h / 24.0]
}

const TRACE_DRIFT_LIMIT: f64 = 1e-4;

/// Uniform substep grid of one prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl HorizonGrid {
    pub fn new(t0: f64, delta_t: f64, dt: f64) -> Result<Self> {
        let ratio = delta_t / dt;
        let steps = ratio.round();
        if !(dt > 0.0) || steps < 1.0 || (steps * dt - delta_t).abs() > 1e-12 * delta_t.max(1.0) {
            return Err(Error::InvalidConfig {
                field: "delta_t",
                reason: format!("{delta_t} is not a positive multiple of dt = {dt}"),
            });
        }
        Ok(Self {
            t0,
            dt,
            steps: steps as usize,
        })
    }

    pub fn span(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.t0 + k as f64 * self.dt).collect()
    }
}

/// Sign in front of the adjoint dissipator in the costate equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DissipatorSign {
    /// `-D^dagger`: the exact adjoint of the forward dynamics.
    #[default]
    Minus,
    /// `+D^dagger`.
    Plus,
}

impl DissipatorSign {
    pub fn value(self) -> f64 {
        match self {
            Self::Minus => -1.0,
            Self::Plus => 1.0,
        }
    }
}

/// `-i[H0 + u Hc, rho] + kappa (L rho L^dagger - {L^dagger L, rho}/2)`.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h0: &HermitianOperator,
    u: f64,
    hc: &HermitianOperator,
    l: &HermitianOperator,
    kappa: f64,
) -> Result<CMatrix> {
    let n = rho.dim();
    for d in [h0.dim(), hc.dim(), l.dim()] {
        same_dim(n, d)?;
    }
    let r = rho.matrix();
    let h = h0.matrix() + hc.matrix() * C64::new(u, 0.0);
    let lm = l.matrix();
    let ldl = lm.adjoint() * lm;
    let unitary = linalg::commutator(&h, r) * C64::new(0.0, -1.0);
    let dissipator = lm * r * lm.adjoint() - linalg::anticommutator(&ldl, r) * C64::new(0.5, 0.0);
    Ok(unitary + dissipator * C64::new(kappa, 0.0))
}

#[derive(Debug, Clone)]
enum Drift {
    /// `x_ij -> c_ij x_ij`, valid when H0 and L are diagonal.
    Diagonal(Vec<C64>),
    /// `x -> K_u x + x K_u^dagger + jump L x L^dagger`.
    Dense {
        k: SparseMatrix,
        k_vals: Vec<C64>,
        hc_vals: Vec<C64>,
        l: SparseMatrix,
        jump: f64,
    },
}

/// Linear map on Hermitian matrices: the forward generator
/// `x -> -i[H,x] + kappa D[L]x`, or the backward costate generator
/// `x -> i[H,x] - sign kappa D^dagger[L]x`.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    n: usize,
    drift: Drift,
    hc: SparseMatrix,
    /// `-i` forward, `+i` backward.
    phase: C64,
    z: CMatrix,
    t: CMatrix,
}

impl Generator {
    fn build(
        h0: &HermitianOperator,
        hc: &HermitianOperator,
        l: &HermitianOperator,
        kappa: f64,
        backward: Option<DissipatorSign>,
    ) -> Self {
        let n = h0.dim();
        let (phase, diss, jump) = match backward {
            None => (C64::new(0.0, -1.0), -0.5 * kappa, kappa),
            Some(sign) => {
                let s = sign.value();
                (C64::new(0.0, 1.0), 0.5 * s * kappa, -s * kappa)
            }
        };
        let drift = if h0.is_diagonal() && l.is_diagonal() {
            let h: Vec<f64> = (0..n).map(|i| h0.matrix()[(i, i)].re).collect();
            let lv: Vec<f64> = (0..n).map(|i| l.matrix()[(i, i)].re).collect();
            let mut c = vec![ZERO; n * n];
            for j in 0..n {
                for i in 0..n {
                    // K = phase H + diss L^2 acting on both sides, plus the jump term
                    let k_i = phase * h[i] + diss * lv[i] * lv[i];
                    let k_j = phase * h[j] + diss * lv[j] * lv[j];
                    c[i + j * n] = k_i + k_j.conj() + jump * lv[i] * lv[j];
                }
            }
            Drift::Diagonal(c)
        } else {
            let lm = l.matrix();
            let k = h0.matrix() * phase + (lm.adjoint() * lm) * C64::new(diss, 0.0);
            let pattern = SparseMatrix::union_pattern(&[&k, hc.matrix()]);
            Drift::Dense {
                k_vals: pattern.gather(&k),
                hc_vals: pattern.gather(hc.matrix()),
                k: pattern,
                l: SparseMatrix::from_dense(lm),
                jump,
            }
        };
        Self {
            n,
            drift,
            hc: SparseMatrix::from_dense(hc.matrix()),
            phase,
            z: CMatrix::zeros(n, n),
            t: CMatrix::zeros(n, n),
        }
    }

    pub(crate) fn forward(model: &ModelConfig) -> Self {
        Self::build(&model.h0, &model.hc, &model.l, model.kappa, None)
    }

    pub(crate) fn backward(model: &ModelConfig, sign: DissipatorSign) -> Self {
        Self::build(&model.h0, &model.hc, &model.l, model.kappa, Some(sign))
    }

    /// `out = A_u x` for Hermitian `x`.
    pub(crate) fn apply(&mut self, u: f64, x: &CMatrix, out: &mut CMatrix) {
        let n = self.n;
        let p = self.phase * u;
        match &mut self.drift {
            Drift::Diagonal(c) => {
                // Y = p Hc x = p (x Hc)^dagger for Hermitian x and Hc
                self.hc.mul_right_adj(x, &mut self.z);
                let (xs, zs, os) = (x.as_slice(), self.z.as_slice(), out.as_mut_slice());
                let pc = p.conj();
                for j in 0..n {
                    for i in 0..n {
                        let ij = i + j * n;
                        os[ij] = c[ij] * xs[ij] + p * zs[j + i * n].conj() + pc * zs[ij];
                    }
                }
            }
            Drift::Dense {
                k,
                k_vals,
                hc_vals,
                l,
                jump,
            } => {
                k.combine_into(&[k_vals, hc_vals], &[C64::new(1.0, 0.0), p]);
                k.mul_right_adj(x, &mut self.z);
                linalg::add_adjoint_into(&self.z, out);
                l.mul_left(x, &mut self.t);
                l.mul_right_adj(&self.t, &mut self.z);
                let jump = *jump;
                for (o, z) in out.iter_mut().zip(self.z.iter()) {
                    *o += z * jump;
                }
            }
        }
    }

    /// `Hc x`, used by the gradient.
    pub(crate) fn hc(&self) -> &SparseMatrix {
        &self.hc
    }
}

/// Forward trajectory of one horizon plus the Taylor stages `A^b rho_k`,
/// `b = 1..=3`, needed for the exact discrete gradient.
#[derive(Debug, Clone)]
pub(crate) struct ForwardPass {
    pub states: Vec<CMatrix>,
    pub stages: Vec<[CMatrix; 3]>,
}

impl ForwardPass {
    pub(crate) fn new(n: usize, steps: usize) -> Self {
        Self {
            states: vec![CMatrix::zeros(n, n); steps + 1],
            stages: vec![std::array::from_fn(|_| CMatrix::zeros(n, n)); steps],
        }
    }
}

/// One Taylor/RK4 step. Writes the stages `A^b x` (b = 1..=3) into
/// `stages` and the re-Hermitized, trace-renormalized result into `next`.
/// Returns the trace deviation removed by renormalization.
pub(crate) fn taylor_step(
    gen: &mut Generator,
    u: f64,
    h: f64,
    x: &CMatrix,
    stages: &mut [CMatrix; 3],
    last: &mut CMatrix,
    next: &mut CMatrix,
    renormalize: bool,
) -> f64 {
    let w = taylor_weights(h);
    let [s1, s2, s3] = stages;
    gen.apply(u, x, s1);
    gen.apply(u, s1, s2);
    gen.apply(u, s2, s3);
    gen.apply(u, s3, last);
    for (idx, o) in next.iter_mut().enumerate() {
        *o = x[idx] + s1[idx] * w[1] + s2[idx] * w[2] + s3[idx] * w[3] + last[idx] * w[4];
    }
    linalg::hermitize(next);
    if !renormalize {
        return 0.0;
    }
    let tr = linalg::trace(next).re;
    *next /= C64::new(tr, 0.0);
    (tr - 1.0).abs()
}

fn check_schedule(schedule: &ControlSchedule, grid: &HorizonGrid) -> Result<()> {
    if schedule.len() != grid.steps {
        return Err(Error::InvalidSchedule(format!(
            "schedule has {} values for a grid of {} steps",
            schedule.len(),
            grid.steps
        )));
    }
    Ok(())
}

/// Runs the forward pass in place. Fails when the accumulated trace
/// correction exceeds the step-size limit.
pub(crate) fn forward_pass(
    gen: &mut Generator,
    rho0: &CMatrix,
    values: &[f64],
    h: f64,
    pass: &mut ForwardPass,
    last: &mut CMatrix,
) -> Result<()> {
    pass.states[0].copy_from(rho0);
    let mut drift = 0.0;
    for (k, &u) in values.iter().enumerate() {
        let (done, rest) = pass.states.split_at_mut(k + 1);
        drift += taylor_step(gen, u, h, &done[k], &mut pass.stages[k], last, &mut rest[0], true);
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::NumericalBreakdown {
                step: k,
                reason: format!("trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT:.0e}"),
            });
        }
    }
    Ok(())
}

/// Averaged state on each grid point, `steps + 1` entries.
pub fn propagate_state(
    rho0: &DensityMatrix,
    schedule: &ControlSchedule,
    grid: &HorizonGrid,
    model: &ModelConfig,
) -> Result<Vec<DensityMatrix>> {
    same_dim(model.dim(), rho0.dim())?;
    check_schedule(schedule, grid)?;
    let n = rho0.dim();
    let mut gen = Generator::forward(model);
    let mut pass = ForwardPass::new(n, grid.steps);
    let mut last = CMatrix::zeros(n, n);
    forward_pass(&mut gen, rho0.matrix(), schedule.values(), grid.dt, &mut pass, &mut last)?;
    Ok(pass
        .states
        .into_iter()
        .map(DensityMatrix::from_trusted)
        .collect())
}

/// Costate on each grid point, integrated backward from `lambda_t`; entry
/// `k` belongs to time `t0 + k dt`.
pub fn propagate_costate(
    lambda_t: &HermitianOperator,
    schedule: &ControlSchedule,
    grid: &HorizonGrid,
    model: &ModelConfig,
    sign: DissipatorSign,
) -> Result<Vec<HermitianOperator>> {
    same_dim(model.dim(), lambda_t.dim())?;
    check_schedule(schedule, grid)?;
    let n = lambda_t.dim();
    let mut gen = Generator::backward(model, sign);
    let mut out = vec![CMatrix::zeros(n, n); grid.steps + 1];
    out[grid.steps].copy_from(lambda_t.matrix());
    let mut stages: [CMatrix; 3] = std::array::from_fn(|_| CMatrix::zeros(n, n));
    let mut last = CMatrix::zeros(n, n);
    for k in (0..grid.steps).rev() {
        let (head, tail) = out.split_at_mut(k + 1);
        let u = schedule.values()[k];
        taylor_step(&mut gen, u, grid.dt, &tail[0], &mut stages, &mut last, &mut head[k], false);
    }
    Ok(out.into_iter().map(HermitianOperator::from_trusted).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::angular_momentum_ops;

    fn model_with(h0: CMatrix, hc: CMatrix, l: CMatrix) -> ModelConfig {
        let n = h0.nrows();
        ModelConfig {
            h0: HermitianOperator::new(h0).unwrap(),
            hc: HermitianOperator::new(hc).unwrap(),
            l: HermitianOperator::new(l).unwrap(),
            target: HermitianOperator::basis_projector(n, 0),
            rho0: DensityMatrix::maximally_mixed(n),
            ..ModelConfig::three_level()
        }
    }

    fn hermitian(n: usize, seed: f64) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |i, j| {
            C64::new(
                (seed + 0.9 * i as f64 + 0.4 * j as f64).sin(),
                (seed * 1.7 - 0.3 * i as f64 + 1.2 * j as f64).cos(),
            )
        });
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn state(n: usize, seed: f64) -> DensityMatrix {
        let a = hermitian(n, seed);
        let p = &a * &a + linalg::identity(n) * C64::new(0.1, 0.0);
        let tr = linalg::trace(&p);
        DensityMatrix::new(p / tr).unwrap()
    }

    #[test]
    fn generator_matches_rhs_on_both_paths() {
        let s = angular_momentum_ops(1.0).unwrap();
        let diag = model_with(
            s.jz.matrix().clone(),
            s.jy.matrix().clone(),
            s.jz.matrix().clone(),
        );
        let dense = model_with(hermitian(3, 0.2), hermitian(3, 1.1), hermitian(3, 2.5));
        for model in [diag, dense] {
            let mut gen = Generator::forward(&model);
            for (seed, u) in [(0.3, 0.0), (1.4, -2.5), (2.9, 4.0)] {
                let rho = state(3, seed);
                let mut out = CMatrix::zeros(3, 3);
                gen.apply(u, rho.matrix(), &mut out);
                let rhs = lindblad_rhs(&rho, &model.h0, u, &model.hc, &model.l, 1.0).unwrap();
                assert!(linalg::max_abs_diff(&out, &rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn backward_generator_is_hilbert_schmidt_adjoint() {
        let model = model_with(hermitian(4, 0.7), hermitian(4, 1.9), hermitian(4, 3.1));
        let mut fwd = Generator::forward(&model);
        let mut bwd = Generator::backward(&model, DissipatorSign::Minus);
        let (x, y) = (hermitian(4, 5.0), hermitian(4, 6.0));
        let (mut ax, mut gy) = (CMatrix::zeros(4, 4), CMatrix::zeros(4, 4));
        fwd.apply(1.3, &x, &mut ax);
        bwd.apply(1.3, &y, &mut gy);
        let lhs = linalg::trace_product(&y, &ax);
        let rhs = linalg::trace_product(&gy, &x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rhs_properties() {
        let s = angular_momentum_ops(1.0).unwrap();
        let eig = DensityMatrix::basis_state(3, 2);
        let zero = HermitianOperator::zeros(3);
        let r = lindblad_rhs(&eig, &zero, 0.0, &s.jy, &s.jz, 1.0).unwrap();
        assert_eq!(linalg::max_abs(&r), 0.0);
        let mixed = DensityMatrix::maximally_mixed(3);
        let r = lindblad_rhs(&mixed, &s.jz, 0.0, &s.jy, &s.jz, 1.0).unwrap();
        assert!(linalg::max_abs(&r) < 1e-15);
        let rho = state(3, 0.8);
        let r = lindblad_rhs(&rho, &s.jz, 2.0, &s.jy, &s.jx, 1.0).unwrap();
        assert!(linalg::trace(&r).norm() < 1e-12);
        assert!(linalg::hermitian_deviation(&r) < 1e-12);
        let small = DensityMatrix::maximally_mixed(2);
        assert!(lindblad_rhs(&small, &s.jz, 0.0, &s.jy, &s.jz, 1.0).is_err());
    }

    #[test]
    fn grid_validation() {
        let g = HorizonGrid::new(0.0, 0.5, 0.01).unwrap();
        assert_eq!(g.steps, 50);
        assert!((g.span() - 0.5).abs() < 1e-12);
        assert!(HorizonGrid::new(0.0, 0.505, 0.01).is_err());
        assert!(HorizonGrid::new(0.0, 0.0, 0.01).is_err());
    }
}
