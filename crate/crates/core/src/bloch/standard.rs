//! Scenario-based receding-horizon controller on the coherent-vector SDE,
//! used as the baseline for the reduced controller.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::basis::{generalized_gell_mann, structure_constants, SuNBasis};
use super::dynamics::{build_superoperators, BlochSuperoperators};
use super::vector::rho_to_bloch;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pmp::{ControlSchedule, InitPolicy, OptimizerOptions, MAX_STEP_GROWTH};
use crate::quantum::DensityMatrix;
use crate::parallel::for_each_mut;
use crate::smpc::CONVERGED_COST;
use crate::trajectory::{path_rng, ControlPolicy, DecisionContext};

/// Norm beyond which a scenario rollout is treated as divergent.
const DIVERGENCE_NORM: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardSmpcOptions {
    /// Noise scenarios averaged in the expected cost.
    pub n_scenarios: usize,
    /// Blocks of length `delta_t` in the cost `sum_{i<N} |X_i - X_f|^2`.
    pub blocks: usize,
    /// Use `dW = 0` in a single scenario.
    pub deterministic: bool,
    /// Evaluate scenarios on the thread pool.
    pub parallel_scenarios: bool,
    /// Descent settings shared with the reduced optimizer.
    pub descent: OptimizerOptions,
}

impl Default for StandardSmpcOptions {
    fn default() -> Self {
        Self {
            n_scenarios: 32,
            blocks: 2,
            deterministic: false,
            parallel_scenarios: true,
            descent: OptimizerOptions::default(),
        }
    }
}

impl StandardSmpcOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenarios == 0 {
            return Err(Error::InvalidConfig {
                field: "n_scenarios",
                reason: "at least one scenario is required".into(),
            });
        }
        if self.blocks < 2 {
            return Err(Error::InvalidConfig {
                field: "blocks",
                reason: format!("{} blocks leave no control in the cost", self.blocks),
            });
        }
        self.descent.validate()
    }

    fn scenarios(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.n_scenarios
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardSolution {
    /// Controls for the `blocks - 1` blocks that enter the cost.
    pub schedule: ControlSchedule,
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl StandardSolution {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().expect("history starts with the initial cost")
    }
}

/// Immutable model data shared by all scenario rollouts.
#[derive(Debug, Clone)]
struct Rollout {
    ops: BlochSuperoperators,
    x_target: DVector<f64>,
    dt: f64,
    block: usize,
    steps: usize,
    drift_t: DMatrix<f64>,
    mu_t: DMatrix<f64>,
    lw_t: DMatrix<f64>,
}

/// One noise scenario with its rollout buffers.
#[derive(Debug, Clone)]
struct Scenario {
    noise: Vec<f64>,
    states: Vec<DVector<f64>>,
    cost: f64,
    grad: Vec<f64>,
}

impl Rollout {
    fn stage_cost(&self, x: &DVector<f64>) -> f64 {
        (x - &self.x_target).norm_squared()
    }

    fn forward(&self, sc: &mut Scenario, x0: &DVector<f64>, values: &[f64]) {
        sc.states[0].copy_from(x0);
        let mut cost = self.stage_cost(x0);
        for t in 0..self.steps {
            let mut next = sc.states[t].clone();
            self.ops.step_in_place(&mut next, values[t], sc.noise[t], self.dt);
            if (t + 1) % self.block == 0 {
                cost += self.stage_cost(&next);
            }
            sc.states[t + 1] = next;
        }
        sc.cost = cost;
    }

    /// Discrete adjoint of the Euler-Maruyama rollout stored in `sc`.
    fn backward(&self, sc: &mut Scenario, values: &[f64]) {
        let sqrt_eta = self.ops.eta.sqrt();
        let c1 = &self.ops.c1;
        let xs = &sc.states;
        let mut p = (&xs[self.steps] - &self.x_target) * 2.0;
        for t in (0..self.steps).rev() {
            let x = &xs[t];
            let dw = sc.noise[t];
            sc.grad[t] = p.dot(&(&self.ops.l_mu * x)) * self.dt;
            // p <- J_t^T p with J_t = I + dt (A + u B) + dW Dg(x)
            let mut next = p.clone();
            next.gemv(self.dt, &self.drift_t, &p, 1.0);
            next.gemv(self.dt * values[t], &self.mu_t, &p, 1.0);
            if dw != 0.0 {
                let a = dw * sqrt_eta;
                next.gemv(a, &self.lw_t, &p, 1.0);
                next.axpy(-a * c1.dot(x), &p, 1.0);
                next.axpy(-a * x.dot(&p), c1, 1.0);
            }
            p = next;
            if t > 0 && t % self.block == 0 {
                p.axpy(2.0, &(x - &self.x_target), 1.0);
            }
        }
    }
}

/// Expected-cost optimizer over sampled noise scenarios, with common random
/// numbers inside one solve and the discrete adjoint of Euler-Maruyama.
#[derive(Debug, Clone)]
pub struct StandardSmpcSolver {
    model: Rollout,
    basis: SuNBasis,
    u_min: f64,
    u_max: f64,
    opts: StandardSmpcOptions,
    scenarios: Vec<Scenario>,
}

impl StandardSmpcSolver {
    pub fn new(model: &ModelConfig, opts: StandardSmpcOptions) -> Result<Self> {
        model.validate()?;
        opts.validate()?;
        let n = model.dim();
        let basis = generalized_gell_mann(n)?;
        let sc = structure_constants(&basis);
        let ops = build_superoperators(
            model.h0.matrix(),
            model.hc.matrix(),
            model.l.matrix(),
            &basis,
            &sc,
            model.kappa,
            model.eta,
        )?;
        let target = DensityMatrix::new(model.target.matrix().clone())?;
        let x_target = rho_to_bloch(&target, &basis)?.x;
        let block = model.horizon_steps();
        let steps = block * (opts.blocks - 1);
        let scenario = Scenario {
            noise: vec![0.0; steps],
            states: vec![DVector::zeros(n * n - 1); steps + 1],
            cost: 0.0,
            grad: vec![0.0; steps],
        };
        Ok(Self {
            model: Rollout {
                drift_t: ops.drift_jacobian(0.0).transpose(),
                mu_t: ops.l_mu.transpose(),
                lw_t: ops.l_w.transpose(),
                ops,
                x_target,
                dt: model.dt,
                block,
                steps,
            },
            basis,
            u_min: model.u_min,
            u_max: model.u_max,
            scenarios: vec![scenario; opts.scenarios()],
            opts,
        })
    }

    pub fn options(&self) -> &StandardSmpcOptions {
        &self.opts
    }

    /// Number of optimized substeps.
    pub fn steps(&self) -> usize {
        self.model.steps
    }

    pub fn basis(&self) -> &SuNBasis {
        &self.basis
    }

    pub fn superoperators(&self) -> &BlochSuperoperators {
        &self.model.ops
    }

    /// Draws a fresh scenario set used by every evaluation until the next draw.
    pub fn resample(&mut self, rng: &mut ChaCha8Rng) {
        if self.opts.deterministic {
            return;
        }
        let sqrt_dt = self.model.dt.sqrt();
        for sc in &mut self.scenarios {
            for w in &mut sc.noise {
                *w = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    /// Rolls out every scenario and returns the mean cost, summed in
    /// scenario order.
    fn rollout(&mut self, x0: &DVector<f64>, values: &[f64]) -> f64 {
        let model = &self.model;
        for_each_mut(&mut self.scenarios, self.opts.parallel_scenarios, |_, sc| {
            model.forward(sc, x0, values)
        });
        self.scenarios.iter().map(|sc| sc.cost).sum::<f64>() / self.scenarios.len() as f64
    }

    fn checked_rollout(&mut self, x0: &DVector<f64>, values: &[f64], iteration: usize) -> Result<f64> {
        let cost = self.rollout(x0, values);
        let diverged = self
            .scenarios
            .iter()
            .any(|sc| sc.states[self.model.steps].norm() > DIVERGENCE_NORM);
        if !cost.is_finite() || diverged {
            return Err(Error::Diverged(iteration));
        }
        Ok(cost)
    }

    /// Gradient of the mean cost for the states left by the last rollout.
    fn gradient(&mut self, values: &[f64], grad: &mut [f64]) {
        let model = &self.model;
        for_each_mut(&mut self.scenarios, self.opts.parallel_scenarios, |_, sc| {
            model.backward(sc, values)
        });
        grad.fill(0.0);
        for sc in &self.scenarios {
            for (g, s) in grad.iter_mut().zip(&sc.grad) {
                *g += s;
            }
        }
        let inv = 1.0 / self.scenarios.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
    }

    /// Mean cost and its gradient for the current scenario set.
    pub fn cost_and_gradient(&mut self, x0: &DVector<f64>, schedule: &ControlSchedule) -> Result<(f64, Vec<f64>)> {
        self.check(x0, schedule)?;
        let cost = self.checked_rollout(x0, schedule.values(), 0)?;
        let mut grad = vec![0.0; self.steps()];
        self.gradient(schedule.values(), &mut grad);
        Ok((cost, grad))
    }

    fn check(&self, x0: &DVector<f64>, schedule: &ControlSchedule) -> Result<()> {
        if x0.len() != self.model.ops.m() {
            return Err(Error::DimensionMismatch {
                expected: self.model.ops.m(),
                got: x0.len(),
            });
        }
        if schedule.len() != self.steps() {
            return Err(Error::InvalidSchedule(format!(
                "schedule has {} values for {} optimized steps",
                schedule.len(),
                self.steps()
            )));
        }
        Ok(())
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

    /// Projected gradient descent with backtracking on the current scenarios.
    pub fn solve(&mut self, x0: &DVector<f64>, warm: Option<&ControlSchedule>) -> Result<StandardSolution> {
        let steps = self.steps();
        let zeros = ControlSchedule::zeros(steps, self.u_min, self.u_max)?;
        let start = match (self.opts.descent.init_policy, warm) {
            (InitPolicy::WarmStartShift, Some(w)) => w.clone(),
            _ => zeros.clone(),
        };
        self.check(x0, &start)?;
        let d = self.opts.descent.clone();

        let mut values = start.values().to_vec();
        let mut cost = self.checked_rollout(x0, &values, 0)?;
        if values.iter().any(|&u| u != 0.0) {
            let zero_cost = self.checked_rollout(x0, zeros.values(), 0)?;
            if zero_cost < cost {
                cost = zero_cost;
                values.copy_from_slice(zeros.values());
            } else {
                self.rollout(x0, &values);
            }
        }

        let mut history = vec![cost];
        let mut grad = vec![0.0; steps];
        let mut candidate = vec![0.0; steps];
        let mut alpha = d.step_size;
        let mut probed = !d.escape_saddles;
        let mut grad_norm = f64::NAN;
        let mut iterations = 0;
        while iterations < d.max_iters && cost > d.cost_floor {
            iterations += 1;
            self.gradient(&values, &mut grad);
            let inv_dt = 1.0 / self.model.dt;
            grad.iter_mut().for_each(|g| *g *= inv_dt);
            grad_norm = self.projected_norm(&values, &grad);
            if grad_norm < d.grad_tol {
                if probed {
                    break;
                }
                probed = true;
                match self.probe_constants(x0, cost, iterations)? {
                    Some((c, u)) => {
                        cost = c;
                        values.fill(u);
                        self.rollout(x0, &values);
                        history.push(cost);
                        alpha = d.step_size;
                        continue;
                    }
                    None => {
                        self.rollout(x0, &values);
                        break;
                    }
                }
            }
            let mut accepted = None;
            for _ in 0..=d.max_backtracks {
                for ((c, &u), &g) in candidate.iter_mut().zip(&values).zip(&grad) {
                    *c = (u - alpha * g).clamp(self.u_min, self.u_max);
                }
                let c = self.checked_rollout(x0, &candidate, iterations)?;
                if c < cost {
                    accepted = Some(c);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(c) = accepted else {
                self.rollout(x0, &values);
                break;
            };
            values.copy_from_slice(&candidate);
            let gain = cost - c;
            cost = c;
            history.push(cost);
            if gain < d.cost_tol {
                break;
            }
            alpha = (2.0 * alpha).min(d.step_size * MAX_STEP_GROWTH);
        }
        Ok(StandardSolution {
            schedule: ControlSchedule::new(values, self.u_min, self.u_max)?,
            cost_history: history,
            iterations,
            grad_norm,
        })
    }

    fn probe_constants(&mut self, x0: &DVector<f64>, cost: f64, iteration: usize) -> Result<Option<(f64, f64)>> {
        let mut best: Option<(f64, f64)> = None;
        for frac in [0.75, 0.25, 1.0, 0.0] {
            let u = self.u_min + frac * (self.u_max - self.u_min);
            let c = self.checked_rollout(x0, &vec![u; self.steps()], iteration)?;
            if c < best.map_or(cost, |b| b.0) {
                best = Some((c, u));
            }
        }
        Ok(best)
    }
}

/// Draws scenarios from the current state, solves, applies the first block
/// (or `reoptimize_every` substeps) and warm-starts the next decision.
#[derive(Debug, Clone)]
pub struct StandardSmpcPolicy {
    solver: StandardSmpcSolver,
    rng: ChaCha8Rng,
    apply: usize,
    warm: Option<ControlSchedule>,
    costs: Vec<f64>,
    solve_seconds: Vec<f64>,
}

impl StandardSmpcPolicy {
    /// Scenario noise for path `path` comes from its own stream of `seed`,
    /// disjoint from the measurement noise streams.
    pub fn new(model: &ModelConfig, opts: StandardSmpcOptions, seed: u64, path: u64) -> Result<Self> {
        let solver = StandardSmpcSolver::new(model, opts)?;
        Ok(Self {
            apply: model.reoptimize_every.unwrap_or(solver.model.block),
            solver,
            rng: path_rng(seed ^ SCENARIO_SEED_MASK, path),
            warm: None,
            costs: Vec::new(),
            solve_seconds: Vec::new(),
        })
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn solve_seconds(&self) -> &[f64] {
        &self.solve_seconds
    }
}

const SCENARIO_SEED_MASK: u64 = 0x5CE7_A410_0000_0001;

impl ControlPolicy for StandardSmpcPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<ControlSchedule> {
        let horizon = self.costs.len();
        let wrap = |e: Error| Error::Horizon {
            horizon,
            source: Box::new(e),
        };
        let start = Instant::now();
        let x = rho_to_bloch(ctx.state, &self.solver.basis)?.x;
        self.solver.resample(&mut self.rng);
        let warm = self.warm.as_ref().map(|w| w.shifted(self.apply));
        let sol = self.solver.solve(&x, warm.as_ref()).map_err(wrap)?;
        self.solve_seconds.push(start.elapsed().as_secs_f64());
        self.costs.push(sol.cost());
        let applied = ControlSchedule::new(
            sol.schedule.values()[..self.apply].to_vec(),
            self.solver.u_min,
            self.solver.u_max,
        )?;
        self.warm = Some(sol.schedule);
        Ok(applied)
    }

    fn predicted_costs(&self) -> &[f64] {
        &self.costs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueDecreaseReport {
    /// `1 - V_{k+1} / V_k`, stopping where `V_k < 1e-12`.
    pub beta: Vec<f64>,
    /// `inf beta > 0` over the estimates after the burn-in.
    pub decreasing: bool,
}

/// Empirical decrease rates of an expected optimal-value sequence.
pub fn value_decrease_monitor(values: &[f64], burn_in: usize) -> Result<ValueDecreaseReport> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let mut beta = Vec::new();
    for w in values.windows(2) {
        if w[0] < CONVERGED_COST {
            break;
        }
        beta.push(1.0 - w[1] / w[0]);
    }
    let considered = beta.iter().skip(burn_in);
    let inf = considered.clone().copied().fold(f64::INFINITY, f64::min);
    let decreasing = considered.count() > 0 && inf > 0.0;
    Ok(ValueDecreaseReport { beta, decreasing })
}
