//! Conditional-state trajectories of the homodyne SME, discretized with the
//! first-order Kraus map, and seeded Monte Carlo ensembles over them.

use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, SparseMatrix};
use crate::model::ModelConfig;
use crate::parallel;
use crate::pmp::ControlSchedule;
use crate::quantum::{
    lyapunov_from_populations, same_dim, DensityMatrix, HermitianOperator, SpectralDecomposition,
};
use crate::stats::SeriesMoments;

const DENOMINATOR_FLOOR: f64 = 1e-14;
const NEGATIVITY_LIMIT: f64 = 1e-4;
/// Full eigenvalue checks run this often (in substeps) and at the end.
const PSD_CHECK_EVERY: usize = 50;

/// Per-step parameters of the SME discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeStepConfig {
    pub dt: f64,
    pub eta: f64,
    pub seed: u64,
}

impl SdeStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig {
                field: "dt",
                reason: format!("{} is not positive", self.dt),
            });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig {
                field: "eta",
                reason: format!("{} is outside [0, 1]", self.eta),
            });
        }
        Ok(())
    }

    /// The scheme is first order; steps above this are accepted but coarse.
    pub fn is_coarse(&self) -> bool {
        self.dt > 0.05
    }
}

/// Per-path generator: `seed_from_u64(base)` on stream `path`.
pub fn path_rng(base_seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(path);
    rng
}

/// `sqrt(eta) Tr[(L + L^dagger) rho]`.
fn measurement_drift(rho: &CMatrix, l: &CMatrix, eta: f64) -> f64 {
    2.0 * eta.sqrt() * linalg::trace_product(l, rho).re
}

/// Draws `dW ~ N(0, dt)` and returns `(dY, dW)` with
/// `dY = sqrt(eta) Tr[(L + L^dagger) rho] dt + dW`.
pub fn sample_increment<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    l: &HermitianOperator,
    cfg: &SdeStepConfig,
    rng: &mut R,
) -> (f64, f64) {
    let z: f64 = rng.sample(StandardNormal);
    let dw = z * cfg.dt.sqrt();
    (measurement_drift(rho.matrix(), l.matrix(), cfg.eta) * cfg.dt + dw, dw)
}

/// One Kraus update `(M rho M^dagger + (1 - eta) dt L rho L^dagger) / Tr(.)`
/// with `M = I - (iH + L^dagger L / 2) dt + sqrt(eta) dY L`.
pub fn kraus_step(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    l: &HermitianOperator,
    cfg: &SdeStepConfig,
    dy: f64,
) -> Result<DensityMatrix> {
    let n = rho.dim();
    same_dim(n, h.dim())?;
    same_dim(n, l.dim())?;
    let lm = l.matrix();
    let m = linalg::identity(n)
        - (h.matrix() * linalg::I + (lm.adjoint() * lm) * C64::new(0.5, 0.0)) * C64::new(cfg.dt, 0.0)
        + lm * C64::new(cfg.eta.sqrt() * dy, 0.0);
    let r = rho.matrix();
    let mut next = &m * r * m.adjoint() + lm * r * lm.adjoint() * C64::new((1.0 - cfg.eta) * cfg.dt, 0.0);
    let tr = linalg::trace(&next).re;
    if !(tr > DENOMINATOR_FLOOR) {
        return Err(Error::NumericalBreakdown {
            step: 0,
            reason: format!("Kraus normalization {tr:.3e}"),
        });
    }
    next /= C64::new(tr, 0.0);
    linalg::hermitize(&mut next);
    Ok(DensityMatrix::from_trusted(next))
}

/// Allocation-free Kraus stepper for a fixed model. `M` is assembled on the
/// union sparsity pattern of `I`, `H0`, `L^dagger L`, `L` and `Hc`.
#[derive(Debug, Clone)]
pub(crate) struct KrausStepper {
    m: SparseMatrix,
    base: Vec<C64>,
    l_part: Vec<C64>,
    hc_part: Vec<C64>,
    l: SparseMatrix,
    l_dense: CMatrix,
    eta: f64,
    dt: f64,
    w: CMatrix,
    t: CMatrix,
}

impl KrausStepper {
    pub(crate) fn new(model: &ModelConfig) -> Self {
        let n = model.dim();
        let lm = model.l.matrix();
        let dt = C64::new(model.dt, 0.0);
        let base = linalg::identity(n)
            - (model.h0.matrix() * linalg::I + (lm.adjoint() * lm) * C64::new(0.5, 0.0)) * dt;
        let l_part = lm * C64::new(model.eta.sqrt(), 0.0);
        let hc_part = model.hc.matrix() * (-linalg::I * dt);
        let m = SparseMatrix::union_pattern(&[&base, &l_part, &hc_part]);
        Self {
            base: m.gather(&base),
            l_part: m.gather(&l_part),
            hc_part: m.gather(&hc_part),
            m,
            l: SparseMatrix::from_dense(lm),
            l_dense: lm.clone(),
            eta: model.eta,
            dt: model.dt,
            w: CMatrix::zeros(n, n),
            t: CMatrix::zeros(n, n),
        }
    }

    pub(crate) fn drift(&self, rho: &CMatrix) -> f64 {
        measurement_drift(rho, &self.l_dense, self.eta)
    }

    /// Updates `rho` in place.
    pub(crate) fn step(&mut self, rho: &mut CMatrix, u: f64, dy: f64) -> std::result::Result<(), String> {
        let one = C64::new(1.0, 0.0);
        self.m.combine_into(
            &[&self.base, &self.l_part, &self.hc_part],
            &[one, C64::new(dy, 0.0), C64::new(u, 0.0)],
        );
        self.m.mul_left(rho, &mut self.w);
        self.m.mul_right_adj(&self.w, &mut self.t);
        if self.eta < 1.0 {
            let c = (1.0 - self.eta) * self.dt;
            self.l.mul_left(rho, &mut self.w);
            self.l.mul_right_adj(&self.w, rho);
            for (t, x) in self.t.iter_mut().zip(rho.iter()) {
                *t += x * c;
            }
        }
        let tr = linalg::trace(&self.t).re;
        if !(tr > DENOMINATOR_FLOOR) {
            return Err(format!("Kraus normalization {tr:.3e}"));
        }
        let inv = 1.0 / tr;
        for (r, t) in rho.iter_mut().zip(self.t.iter()) {
            *r = t * inv;
        }
        linalg::hermitize(rho);
        let n = rho.nrows();
        if let Some(d) = (0..n).map(|i| rho[(i, i)].re).find(|d| *d < -NEGATIVITY_LIMIT) {
            return Err(format!("negative population {d:.3e}"));
        }
        Ok(())
    }
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    if linalg::is_diagonal(rho, 0.0) {
        return (0..rho.nrows()).map(|i| rho[(i, i)].re).fold(f64::INFINITY, f64::min);
    }
    SymmetricEigen::new(rho.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// State handed to a policy at a decision instant.
#[derive(Debug)]
pub struct DecisionContext<'a> {
    pub step: usize,
    pub time: f64,
    pub state: &'a DensityMatrix,
}

/// Supplies controls to a trajectory. The returned schedule is applied
/// substep by substep; the policy is asked again once it is used up.
pub trait ControlPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<ControlSchedule>;

    /// Per-decision predicted costs, if the policy produces them.
    fn predicted_costs(&self) -> &[f64] {
        &[]
    }
}

impl<F> ControlPolicy for F
where
    F: FnMut(&DecisionContext<'_>) -> Result<ControlSchedule>,
{
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<ControlSchedule> {
        self(ctx)
    }
}

/// `u = 0` throughout.
#[derive(Debug, Clone)]
pub struct ZeroControl {
    schedule: ControlSchedule,
}

impl ZeroControl {
    pub fn new(model: &ModelConfig) -> Result<Self> {
        Ok(Self {
            schedule: ControlSchedule::zeros(model.total_steps().max(1), model.u_min, model.u_max)?,
        })
    }
}

impl ControlPolicy for ZeroControl {
    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> Result<ControlSchedule> {
        Ok(self.schedule.clone())
    }
}

/// Open-loop control: the given values, then zero.
#[derive(Debug, Clone)]
pub struct OpenLoop {
    schedule: ControlSchedule,
    tail: ControlSchedule,
    started: bool,
}

impl OpenLoop {
    pub fn new(schedule: ControlSchedule, model: &ModelConfig) -> Result<Self> {
        let (lo, hi) = schedule.bounds();
        Ok(Self {
            schedule,
            tail: ControlSchedule::zeros(model.total_steps().max(1), lo, hi)?,
            started: false,
        })
    }
}

impl ControlPolicy for OpenLoop {
    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> Result<ControlSchedule> {
        if self.started {
            return Ok(self.tail.clone());
        }
        self.started = true;
        Ok(self.schedule.clone())
    }
}

/// Single path; every series has one entry per substep plus the initial
/// point. `controls[i]` and `dy[i]` belong to the step ending at `times[i]`
/// (both are 0 at index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub controls: Vec<f64>,
    pub dy: Vec<f64>,
    pub final_state: DensityMatrix,
}

/// What a path run records; `record_every` thins the state-derived series.
struct PathSeries {
    fidelity: Vec<f64>,
    lyapunov: Vec<f64>,
    controls: Vec<f64>,
    dy: Vec<f64>,
}

struct PathObserver<'a> {
    target: &'a CMatrix,
    subspaces: Option<&'a [HermitianOperator]>,
    record_every: usize,
    keep_inputs: bool,
}

impl PathObserver<'_> {
    fn observe(&self, rho: &CMatrix, out: &mut PathSeries) {
        out.fidelity.push(linalg::trace_product(rho, self.target).re);
        if let Some(projectors) = self.subspaces {
            let pops: Vec<f64> = projectors
                .iter()
                .map(|p| linalg::trace_product(rho, p.matrix()).re.max(0.0))
                .collect();
            let v = lyapunov_from_populations(&pops).expect("populations clamped at zero");
            out.lyapunov.push(v);
        }
    }
}

/// Runs one path from `model.rho0` for `model.total_steps()` substeps.
fn run_path<P: ControlPolicy + ?Sized>(
    model: &ModelConfig,
    stepper: &mut KrausStepper,
    policy: &mut P,
    rng: &mut ChaCha8Rng,
    observer: &PathObserver<'_>,
) -> Result<(PathSeries, CMatrix)> {
    let total = model.total_steps();
    let sqrt_dt = model.dt.sqrt();
    let mut rho = model.rho0.matrix().clone();
    let mut series = PathSeries {
        fidelity: Vec::new(),
        lyapunov: Vec::new(),
        controls: Vec::new(),
        dy: Vec::new(),
    };
    observer.observe(&rho, &mut series);
    if observer.keep_inputs {
        series.controls.push(0.0);
        series.dy.push(0.0);
    }
    let mut schedule: Option<ControlSchedule> = None;
    let mut pos = 0;
    for step in 0..total {
        if schedule.as_ref().is_none_or(|s| pos >= s.len()) {
            let state = DensityMatrix::from_trusted(rho.clone());
            let ctx = DecisionContext {
                step,
                time: step as f64 * model.dt,
                state: &state,
            };
            let s = policy.decide(&ctx).map_err(|e| Error::Controller {
                step,
                source: Box::new(e),
            })?;
            if s.is_empty() {
                return Err(Error::Controller {
                    step,
                    source: Box::new(Error::InvalidSchedule("empty schedule".into())),
                });
            }
            schedule = Some(s);
            pos = 0;
        }
        let u = schedule.as_ref().expect("schedule set above").values()[pos];
        pos += 1;
        let z: f64 = rng.sample(StandardNormal);
        let dy = stepper.drift(&rho) * model.dt + z * sqrt_dt;
        stepper
            .step(&mut rho, u, dy)
            .map_err(|reason| Error::NumericalBreakdown { step, reason })?;
        let done = step + 1;
        if done % PSD_CHECK_EVERY == 0 || done == total {
            let min_ev = min_eigenvalue(&rho);
            if min_ev < -NEGATIVITY_LIMIT {
                return Err(Error::NumericalBreakdown {
                    step,
                    reason: format!("negative eigenvalue {min_ev:.3e}"),
                });
            }
        }
        if observer.keep_inputs {
            series.controls.push(u);
            series.dy.push(dy);
        }
        if done % observer.record_every == 0 || done == total {
            observer.observe(&rho, &mut series);
        }
    }
    Ok((series, rho))
}

fn recorded_times(model: &ModelConfig, record_every: usize) -> Vec<f64> {
    let total = model.total_steps();
    let mut steps: Vec<usize> = (0..=total).step_by(record_every).collect();
    if *steps.last().expect("step 0 is always recorded") != total {
        steps.push(total);
    }
    steps.into_iter().map(|k| k as f64 * model.dt).collect()
}

/// Single seeded trajectory, recorded at every substep.
pub fn simulate_trajectory<P: ControlPolicy + ?Sized>(
    model: &ModelConfig,
    policy: &mut P,
    seed: u64,
) -> Result<TrajectoryRecord> {
    model.validate()?;
    let mut stepper = KrausStepper::new(model);
    let mut rng = path_rng(seed, 0);
    let observer = PathObserver {
        target: model.target.matrix(),
        subspaces: None,
        record_every: 1,
        keep_inputs: true,
    };
    let (series, rho) = run_path(model, &mut stepper, policy, &mut rng, &observer)?;
    Ok(TrajectoryRecord {
        times: recorded_times(model, 1),
        fidelity: series.fidelity,
        controls: series.controls,
        dy: series.dy,
        final_state: DensityMatrix::from_trusted(rho),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    /// `None` uses the global pool; `Some(1)` runs sequentially.
    pub threads: Option<usize>,
    /// Record state-derived series every this many substeps.
    pub record_every: usize,
    /// A path counts as collapsed into subspace `a` if `Tr(rho_T Pi_a)` exceeds this.
    pub collapse_threshold: f64,
    /// Largest tolerated fraction of aborted paths.
    pub abort_limit: f64,
    /// Paths per work unit; fixed so results do not depend on `threads`.
    pub chunk_size: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            threads: None,
            record_every: 1,
            collapse_threshold: 0.99,
            abort_limit: 0.01,
            chunk_size: 8,
        }
    }
}

/// Ensemble averages over completed paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub stderr_fidelity: Vec<f64>,
    /// `E[V(rho_t)]` over the eigenspaces of `L`.
    pub mean_lyapunov: Vec<f64>,
    pub stderr_lyapunov: Vec<f64>,
    /// Eigenvalues of `L` labelling [`Self::collapse_counts`].
    pub subspace_labels: Vec<f64>,
    pub collapse_counts: Vec<usize>,
    /// Mean terminal population of each eigenspace of `L`.
    pub mean_final_populations: Vec<f64>,
    /// Mean terminal purity `Tr(rho_T^2)`.
    pub mean_final_purity: f64,
    /// Per-decision predicted costs reported by the policy.
    pub mean_predicted_cost: Vec<f64>,
    pub stderr_predicted_cost: Vec<f64>,
    pub n_paths: usize,
    pub aborted: usize,
}

impl EnsembleStats {
    pub fn collapse_fractions(&self) -> Vec<f64> {
        self.collapse_counts
            .iter()
            .map(|&c| c as f64 / self.n_paths as f64)
            .collect()
    }

    pub fn terminal_fidelity(&self) -> (f64, f64) {
        (
            *self.mean_fidelity.last().expect("at least one record"),
            *self.stderr_fidelity.last().expect("at least one record"),
        )
    }
}

#[derive(Default)]
struct ChunkResult {
    fidelity: SeriesMoments,
    lyapunov: SeriesMoments,
    populations: SeriesMoments,
    purity: SeriesMoments,
    predicted: SeriesMoments,
    collapse: Vec<usize>,
    aborted: usize,
    error: Option<(usize, Error)>,
}

fn is_numerical(e: &Error) -> bool {
    match e {
        Error::NumericalBreakdown { .. } | Error::Diverged(_) | Error::BallViolation { .. } => true,
        Error::Controller { source, .. }
        | Error::Optimizer { source, .. }
        | Error::Horizon { source, .. } => is_numerical(source),
        _ => false,
    }
}

/// Runs `n_paths` seeded paths, path `i` on stream `i` of `base_seed`, and
/// aggregates in path order. Paths that break down numerically are dropped
/// and counted; other errors fail the run.
pub fn monte_carlo_ensemble<P, F>(
    model: &ModelConfig,
    make_policy: F,
    n_paths: usize,
    base_seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats>
where
    P: ControlPolicy,
    F: Fn(usize) -> Result<P> + Sync + Send,
{
    model.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidConfig {
            field: "n_paths",
            reason: "at least one path is required".into(),
        });
    }
    if opts.record_every == 0 {
        return Err(Error::InvalidConfig {
            field: "record_every",
            reason: "must be at least 1".into(),
        });
    }
    let decomposition = SpectralDecomposition::grouped(&model.l);
    let projectors = decomposition.projectors();
    let n_sub = projectors.len();
    let observer = PathObserver {
        target: model.target.matrix(),
        subspaces: Some(projectors),
        record_every: opts.record_every,
        keep_inputs: false,
    };
    let stepper = KrausStepper::new(model);

    let chunks = parallel::map_chunks(n_paths, opts.chunk_size, opts.threads, |range| {
        let mut out = ChunkResult {
            collapse: vec![0; n_sub],
            ..ChunkResult::default()
        };
        let mut stepper = stepper.clone();
        for path in range {
            let mut rng = path_rng(base_seed, path as u64);
            let result = make_policy(path).and_then(|mut policy| {
                run_path(model, &mut stepper, &mut policy, &mut rng, &observer)
                    .map(|(series, rho)| (series, rho, policy.predicted_costs().to_vec()))
            });
            match result {
                Ok((series, rho, predicted)) => {
                    out.fidelity.push(&series.fidelity);
                    out.lyapunov.push(&series.lyapunov);
                    let pops: Vec<f64> = projectors
                        .iter()
                        .map(|p| linalg::trace_product(&rho, p.matrix()).re)
                        .collect();
                    for (c, p) in out.collapse.iter_mut().zip(&pops) {
                        if *p > opts.collapse_threshold {
                            *c += 1;
                        }
                    }
                    out.populations.push(&pops);
                    out.purity.push(&[linalg::trace_product(&rho, &rho).re]);
                    out.predicted.push(&predicted);
                }
                Err(e) if is_numerical(&e) => out.aborted += 1,
                Err(e) => {
                    out.error = Some((path, e));
                    break;
                }
            }
        }
        out
    });

    let mut total = ChunkResult {
        collapse: vec![0; n_sub],
        ..ChunkResult::default()
    };
    for c in chunks {
        if let Some((_, e)) = c.error {
            return Err(e);
        }
        total.fidelity.merge(&c.fidelity);
        total.lyapunov.merge(&c.lyapunov);
        total.populations.merge(&c.populations);
        total.purity.merge(&c.purity);
        total.predicted.merge(&c.predicted);
        for (t, x) in total.collapse.iter_mut().zip(&c.collapse) {
            *t += x;
        }
        total.aborted += c.aborted;
    }
    if total.aborted as f64 > opts.abort_limit * n_paths as f64 || total.aborted == n_paths {
        return Err(Error::TooManyAborts {
            aborted: total.aborted,
            total: n_paths,
            limit: 100.0 * opts.abort_limit,
        });
    }
    Ok(EnsembleStats {
        times: recorded_times(model, opts.record_every),
        mean_fidelity: total.fidelity.mean().to_vec(),
        stderr_fidelity: total.fidelity.stderr(),
        mean_lyapunov: total.lyapunov.mean().to_vec(),
        stderr_lyapunov: total.lyapunov.stderr(),
        subspace_labels: decomposition.eigenvalues().to_vec(),
        collapse_counts: total.collapse,
        mean_final_populations: total.populations.mean().to_vec(),
        mean_final_purity: total.purity.mean()[0],
        mean_predicted_cost: total.predicted.mean().to_vec(),
        stderr_predicted_cost: total.predicted.stderr(),
        n_paths: total.fidelity.count() as usize,
        aborted: total.aborted,
    })
}
