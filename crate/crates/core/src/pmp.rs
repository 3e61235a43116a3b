//! Horizon optimizer for the eigenstate-reduced cost `2(1 - Tr(rho_T Pi_f))`.
//!
//! The gradient is assembled from the costate of the discrete Taylor/RK4 map
//! (see [`crate::lindblad`]). Divided by `dt`, its leading term is the
//! switching function `S = -i Tr(lambda [Hc, rho])`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lindblad::{
    forward_pass, taylor_weights, DissipatorSign, ForwardPass, Generator, HorizonGrid,
};
use crate::linalg::{self, CMatrix};
use crate::model::ModelConfig;
use crate::quantum::{overlap, same_dim, validate_projector, DensityMatrix, HermitianOperator};

const IMAG_TOL: f64 = 1e-10;
/// Accepted steps may grow to this multiple of the initial step size.
pub(crate) const MAX_STEP_GROWTH: f64 = 1024.0;

/// Piecewise-constant control values on a horizon grid, within bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    values: Vec<f64>,
    u_min: f64,
    u_max: f64,
}

impl ControlSchedule {
    pub fn new(values: Vec<f64>, u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min < u_max) {
            return Err(Error::InvalidSchedule(format!(
                "u_min = {u_min} is not below u_max = {u_max}"
            )));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(u_min..=u_max).contains(*v))
        {
            return Err(Error::InvalidSchedule(format!(
                "value {v} at step {k} is outside [{u_min}, {u_max}]"
            )));
        }
        Ok(Self {
            values,
            u_min,
            u_max,
        })
    }

    /// Constant schedule; `value` is clipped into the bounds.
    pub fn constant(len: usize, value: f64, u_min: f64, u_max: f64) -> Result<Self> {
        Self::new(vec![value.clamp(u_min, u_max); len], u_min, u_max)
    }

    pub fn zeros(len: usize, u_min: f64, u_max: f64) -> Result<Self> {
        Self::constant(len, 0.0, u_min, u_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.u_min, self.u_max)
    }

    /// Drops the first `applied` values and pads with the last one.
    pub fn shifted(&self, applied: usize) -> Self {
        let len = self.values.len();
        let pad = *self.values.last().unwrap_or(&0.0);
        let mut values: Vec<f64> = self.values.iter().skip(applied).copied().collect();
        values.resize(len, pad);
        Self { values, ..*self }
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPolicy {
    Zeros,
    /// Previous horizon's solution shifted by the applied substeps.
    #[default]
    WarmStartShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    pub step_size: f64,
    pub grad_tol: f64,
    pub init_policy: InitPolicy,
    pub max_backtracks: usize,
    /// Costs at or below this are treated as optimal.
    pub cost_floor: f64,
    /// Stop once an accepted step improves the cost by less than this.
    pub cost_tol: f64,
    /// Try constant schedules when the gradient vanishes above the floor.
    pub escape_saddles: bool,
    pub dissipator_sign: DissipatorSign,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 60,
            step_size: 0.5,
            grad_tol: 1e-5,
            init_policy: InitPolicy::WarmStartShift,
            max_backtracks: 20,
            cost_floor: 1e-9,
            cost_tol: 1e-10,
            escape_saddles: true,
            dissipator_sign: DissipatorSign::Minus,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::InvalidConfig { field, reason });
        if self.max_iters < 1 {
            return bad("max_iters", "must be at least 1".into());
        }
        if !(self.step_size > 0.0) {
            return bad("step_size", format!("{} is not positive", self.step_size));
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", format!("{} is not positive", self.grad_tol));
        }
        Ok(())
    }
}

/// `2(1 - Tr(rho Pi_f))`; `target` may have any rank.
pub fn reduced_cost(rho_pred: &DensityMatrix, target: &HermitianOperator) -> Result<f64> {
    same_dim(rho_pred.dim(), target.dim())?;
    validate_projector(target, false)?;
    Ok(2.0 * (1.0 - overlap(rho_pred, target)?))
}

/// `S = -i Tr(lambda [Hc, rho])`.
pub fn switching_function(
    lambda: &HermitianOperator,
    rho: &DensityMatrix,
    hc: &HermitianOperator,
) -> Result<f64> {
    same_dim(rho.dim(), lambda.dim())?;
    same_dim(rho.dim(), hc.dim())?;
    let comm = linalg::commutator(hc.matrix(), rho.matrix());
    let s = linalg::trace_product(lambda.matrix(), &comm) * C64::new(0.0, -1.0);
    let scale = linalg::max_abs(lambda.matrix()) * linalg::max_abs(hc.matrix());
    if s.im.abs() > IMAG_TOL * scale.max(1.0) {
        return Err(Error::NotHermitian { deviation: s.im.abs() });
    }
    Ok(s.re)
}

/// Result of [`bang_bang_extract`].
#[derive(Debug, Clone, PartialEq)]
pub struct BangBang {
    pub schedule: ControlSchedule,
    /// Steps where `|S| <= tol`; their values are taken from the base schedule.
    pub singular: Vec<bool>,
}

/// `u_max` where `S < -tol`, `u_min` where `S > tol`, unchanged elsewhere.
pub fn bang_bang_extract(switching: &[f64], base: &ControlSchedule, singular_tol: f64) -> Result<BangBang> {
    if switching.len() != base.len() {
        return Err(Error::InvalidSchedule(format!(
            "{} switching values for a schedule of {} steps",
            switching.len(),
            base.len()
        )));
    }
    let (lo, hi) = base.bounds();
    let mut singular = Vec::with_capacity(switching.len());
    let values = switching
        .iter()
        .zip(base.values())
        .map(|(&s, &u)| {
            singular.push(s.abs() <= singular_tol);
            if s < -singular_tol {
                hi
            } else if s > singular_tol {
                lo
            } else {
                u
            }
        })
        .collect();
    Ok(BangBang {
        schedule: base.with_values(values),
        singular,
    })
}

/// Default singular tolerance, `1e-6 (u_max - u_min)`.
pub fn default_singular_tol(u_min: f64, u_max: f64) -> f64 {
    1e-6 * (u_max - u_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    pub schedule: ControlSchedule,
    /// Cost of the starting schedule followed by every accepted iterate.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    /// Infinity norm of the projected gradient at the returned schedule
    /// (`NaN` when the solve stopped at the cost floor).
    pub grad_norm: f64,
}

impl HorizonSolution {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().expect("history is never empty")
    }
}

/// Reusable horizon optimizer; owns propagation buffers so repeated solves
/// along a closed-loop path do not allocate.
#[derive(Debug, Clone)]
pub struct HorizonOptimizer {
    opts: OptimizerOptions,
    fwd: Generator,
    bwd: Generator,
    lambda_t: CMatrix,
    target: HermitianOperator,
    steps: usize,
    dt: f64,
    u_min: f64,
    u_max: f64,
    current: ForwardPass,
    trial: ForwardPass,
    scratch: Scratch,
}

#[derive(Debug, Clone)]
struct Scratch {
    last: CMatrix,
    w: [CMatrix; 5],
    hv: [CMatrix; 4],
}

impl HorizonOptimizer {
    pub fn new(model: &ModelConfig, opts: OptimizerOptions) -> Result<Self> {
        opts.validate()?;
        validate_projector(&model.target, false)?;
        let n = model.dim();
        let steps = model.horizon_steps();
        Ok(Self {
            fwd: Generator::forward(model),
            bwd: Generator::backward(model, opts.dissipator_sign),
            lambda_t: model.target.matrix() * C64::new(-2.0, 0.0),
            target: model.target.clone(),
            steps,
            dt: model.dt,
            u_min: model.u_min,
            u_max: model.u_max,
            current: ForwardPass::new(n, steps),
            trial: ForwardPass::new(n, steps),
            scratch: Scratch {
                last: CMatrix::zeros(n, n),
                w: std::array::from_fn(|_| CMatrix::zeros(n, n)),
                hv: std::array::from_fn(|_| CMatrix::zeros(n, n)),
            },
            opts,
        })
    }

    pub fn options(&self) -> &OptimizerOptions {
        &self.opts
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn target(&self) -> &HermitianOperator {
        &self.target
    }

    fn terminal_cost(&self, pass: &ForwardPass) -> f64 {
        let rho = &pass.states[self.steps];
        2.0 * (1.0 - linalg::trace_product(rho, self.target.matrix()).re)
    }

    /// Forward pass into `trial`; returns its cost.
    fn evaluate_trial(&mut self, rho: &CMatrix, values: &[f64]) -> Result<f64> {
        forward_pass(&mut self.fwd, rho, values, self.dt, &mut self.trial, &mut self.scratch.last)?;
        Ok(self.terminal_cost(&self.trial))
    }

    /// Exact `dJ/du_k` of the discrete map for the schedule stored in
    /// `current`.
    fn gradient(&mut self, values: &[f64], grad: &mut [f64]) {
        let wt = taylor_weights(self.dt);
        let Scratch { w, hv, .. } = &mut self.scratch;
        w[0].copy_from(&self.lambda_t);
        for k in (0..self.steps).rev() {
            let u = values[k];
            for a in 0..4 {
                let (src, dst) = w.split_at_mut(a + 1);
                self.bwd.apply(u, &src[a], &mut dst[0]);
            }
            let hc = self.fwd.hc();
            hc.mul_left(&self.current.states[k], &mut hv[0]);
            for b in 1..4 {
                hc.mul_left(&self.current.stages[k][b - 1], &mut hv[b]);
            }
            // <w_a, B v_b> = 2 Im Tr(Hc v_b w_a) with B x = -i[Hc, x]
            let mut g = 0.0;
            for m in 1..=4 {
                let mut acc = 0.0;
                for a in 0..m {
                    acc += linalg::trace_product(&hv[m - 1 - a], &w[a]).im;
                }
                g += 2.0 * wt[m] * acc;
            }
            grad[k] = g;
            // lambda_k = sum_m wt[m] w_m, stored back into w[0]
            let (head, tail) = w.split_at_mut(1);
            for (idx, v) in head[0].iter_mut().enumerate() {
                for (m, wm) in tail.iter().enumerate() {
                    *v += wm[idx] * wt[m + 1];
                }
            }
        }
    }

    /// Cost and exact gradient `dJ/du_k` for a schedule from `rho`.
    pub fn cost_and_gradient(&mut self, rho: &DensityMatrix, schedule: &ControlSchedule) -> Result<(f64, Vec<f64>)> {
        self.check(rho, schedule)?;
        forward_pass(
            &mut self.fwd,
            rho.matrix(),
            schedule.values(),
            self.dt,
            &mut self.current,
            &mut self.scratch.last,
        )?;
        let cost = self.terminal_cost(&self.current);
        let mut grad = vec![0.0; self.steps];
        self.gradient(schedule.values(), &mut grad);
        Ok((cost, grad))
    }

    fn check(&self, rho: &DensityMatrix, schedule: &ControlSchedule) -> Result<()> {
        same_dim(self.target.dim(), rho.dim())?;
        if schedule.len() != self.steps {
            return Err(Error::InvalidSchedule(format!(
                "schedule has {} values for a horizon of {} steps",
                schedule.len(),
                self.steps
            )));
        }
        Ok(())
    }

    /// Projected gradient descent with backtracking from `start`.
    pub fn solve(&mut self, rho: &DensityMatrix, warm: Option<&ControlSchedule>) -> Result<HorizonSolution> {
        let zeros = ControlSchedule::zeros(self.steps, self.u_min, self.u_max)?;
        let start = match (self.opts.init_policy, warm) {
            (InitPolicy::WarmStartShift, Some(w)) => w.clone(),
            _ => zeros.clone(),
        };
        self.check(rho, &start)?;
        let r = rho.matrix();
        let wrap = |iteration: usize| move |e: Error| Error::Optimizer {
            iteration,
            source: Box::new(e),
        };

        let mut values = start.values().to_vec();
        let mut cost = self.evaluate_trial(r, &values).map_err(wrap(0))?;
        std::mem::swap(&mut self.current, &mut self.trial);
        if warm.is_some() && values.iter().any(|&u| u != 0.0) {
            let zero_cost = self.evaluate_trial(r, zeros.values()).map_err(wrap(0))?;
            if zero_cost < cost {
                cost = zero_cost;
                values.copy_from_slice(zeros.values());
                std::mem::swap(&mut self.current, &mut self.trial);
            }
        }

        let mut history = vec![cost];
        let mut grad = vec![0.0; self.steps];
        let mut candidate = vec![0.0; self.steps];
        let mut alpha = self.opts.step_size;
        let mut probed = !self.opts.escape_saddles;
        let mut grad_norm = f64::NAN;
        let mut iterations = 0;
        while iterations < self.opts.max_iters && cost > self.opts.cost_floor {
            iterations += 1;
            self.gradient(&values, &mut grad);
            let inv_dt = 1.0 / self.dt;
            grad.iter_mut().for_each(|g| *g *= inv_dt);
            grad_norm = self.projected_norm(&values, &grad);
            if grad_norm < self.opts.grad_tol {
                if probed {
                    break;
                }
                probed = true;
                match self.probe_constants(r, cost).map_err(wrap(iterations))? {
                    Some((c, u)) => {
                        cost = c;
                        values.fill(u);
                        history.push(cost);
                        alpha = self.opts.step_size;
                        continue;
                    }
                    None => break,
                }
            }
            let mut accepted = None;
            for _ in 0..=self.opts.max_backtracks {
                for ((c, &u), &g) in candidate.iter_mut().zip(&values).zip(&grad) {
                    *c = (u - alpha * g).clamp(self.u_min, self.u_max);
                }
                let c = self.evaluate_trial(r, &candidate).map_err(wrap(iterations))?;
                if c < cost {
                    accepted = Some(c);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(c) = accepted else { break };
            std::mem::swap(&mut self.current, &mut self.trial);
            values.copy_from_slice(&candidate);
            let gain = cost - c;
            cost = c;
            history.push(cost);
            if gain < self.opts.cost_tol {
                break;
            }
            alpha = (2.0 * alpha).min(self.opts.step_size * MAX_STEP_GROWTH);
        }
        Ok(HorizonSolution {
            schedule: start.with_values(values),
            cost_history: history,
            iterations,
            grad_norm,
        })
    }

    fn projected_norm(&self, values: &[f64], grad: &[f64]) -> f64 {
        values
            .iter()
            .zip(grad)
            .map(|(&u, &g)| {
                let blocked = (u <= self.u_min && g > 0.0) || (u >= self.u_max && g < 0.0);
                if blocked {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Best constant schedule among a few fractions of the control range,
    /// if it beats `cost`. Leaves the winner in `current`.
    fn probe_constants(&mut self, r: &CMatrix, cost: f64) -> Result<Option<(f64, f64)>> {
        let mut best: Option<(f64, f64)> = None;
        let mut best_pass = None;
        for frac in [0.75, 0.25, 1.0, 0.0] {
            let u = self.u_min + frac * (self.u_max - self.u_min);
            let values = vec![u; self.steps];
            let c = self.evaluate_trial(r, &values)?;
            if c < best.map_or(cost, |b| b.0) {
                best = Some((c, u));
                best_pass = Some(self.trial.clone());
            }
        }
        if let Some(pass) = best_pass {
            self.current = pass;
        }
        Ok(best)
    }
}

/// One-shot horizon solve; see [`HorizonOptimizer::solve`].
pub fn optimize_horizon(
    rho_t: &DensityMatrix,
    model: &ModelConfig,
    grid: &HorizonGrid,
    opts: &OptimizerOptions,
    warm: Option<&ControlSchedule>,
) -> Result<HorizonSolution> {
    let mut m = model.clone();
    m.dt = grid.dt;
    m.delta_t = grid.span();
    HorizonOptimizer::new(&m, opts.clone())?.solve(rho_t, warm)
}

/// Exact gradient `dJ/du_k` of the reduced cost over one horizon.
pub fn cost_gradient(
    rho_t: &DensityMatrix,
    schedule: &ControlSchedule,
    model: &ModelConfig,
    sign: DissipatorSign,
) -> Result<(f64, Vec<f64>)> {
    let opts = OptimizerOptions {
        dissipator_sign: sign,
        ..OptimizerOptions::default()
    };
    HorizonOptimizer::new(model, opts)?.cost_and_gradient(rho_t, schedule)
}
