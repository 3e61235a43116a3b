//! Receding-horizon loop: optimize on the averaged model from the current
//! conditional state, apply through the Kraus simulation, repeat.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pmp::{ControlSchedule, HorizonOptimizer, OptimizerOptions};
use crate::trajectory::{
    monte_carlo_ensemble, simulate_trajectory, ControlPolicy, DecisionContext, EnsembleOptions,
    EnsembleStats, TrajectoryRecord, ZeroControl,
};

/// Policy that solves one horizon per decision and applies its first
/// `apply` substeps (the whole horizon unless `reoptimize_every` is set).
#[derive(Debug, Clone)]
pub struct SmpcPolicy {
    optimizer: HorizonOptimizer,
    apply: usize,
    warm: Option<ControlSchedule>,
    costs: Vec<f64>,
    decision_fidelity: Vec<f64>,
    applied: Vec<ControlSchedule>,
    solve_seconds: Vec<f64>,
    keep_history: bool,
}

impl SmpcPolicy {
    pub fn new(model: &ModelConfig, opts: OptimizerOptions) -> Result<Self> {
        model.validate()?;
        let optimizer = HorizonOptimizer::new(model, opts)?;
        Ok(Self {
            apply: model.reoptimize_every.unwrap_or(optimizer.steps()),
            optimizer,
            warm: None,
            costs: Vec::new(),
            decision_fidelity: Vec::new(),
            applied: Vec::new(),
            solve_seconds: Vec::new(),
            keep_history: false,
        })
    }

    /// Keep applied schedules and per-decision fidelities.
    pub fn with_history(mut self) -> Self {
        self.keep_history = true;
        self
    }

    /// Predicted cost `J_k` of every horizon solved so far.
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Wall-clock seconds of each horizon solve.
    pub fn solve_seconds(&self) -> &[f64] {
        &self.solve_seconds
    }
}

impl ControlPolicy for SmpcPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<ControlSchedule> {
        let horizon = self.costs.len();
        let warm = self.warm.as_ref().map(|w| w.shifted(self.apply));
        let start = Instant::now();
        let sol = self
            .optimizer
            .solve(ctx.state, warm.as_ref())
            .map_err(|e| Error::Horizon {
                horizon,
                source: Box::new(e),
            })?;
        self.solve_seconds.push(start.elapsed().as_secs_f64());
        self.costs.push(sol.cost());
        let (lo, hi) = sol.schedule.bounds();
        let applied = ControlSchedule::new(sol.schedule.values()[..self.apply].to_vec(), lo, hi)?;
        if self.keep_history {
            let target = self.optimizer_target_fidelity(ctx);
            self.decision_fidelity.push(target);
            self.applied.push(applied.clone());
        }
        self.warm = Some(sol.schedule);
        Ok(applied)
    }

    fn predicted_costs(&self) -> &[f64] {
        &self.costs
    }
}

impl SmpcPolicy {
    fn optimizer_target_fidelity(&self, ctx: &DecisionContext<'_>) -> f64 {
        ctx.state.expectation(self.optimizer.target())
    }
}

/// Per-horizon diagnostics of one closed-loop path.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRecord {
    pub decision_times: Vec<f64>,
    /// Predicted cost `J_k` of each horizon solve.
    pub predicted_costs: Vec<f64>,
    /// Fidelity of the conditional state at each decision instant.
    pub decision_fidelity: Vec<f64>,
    pub applied: Vec<ControlSchedule>,
    /// `J_{k+1} / J_k` along the path.
    pub gamma_estimates: Vec<f64>,
}

/// One controlled path.
pub fn run_closed_loop(
    model: &ModelConfig,
    opts: &OptimizerOptions,
    seed: u64,
) -> Result<(TrajectoryRecord, ClosedLoopRecord)> {
    let mut policy = SmpcPolicy::new(model, opts.clone())?.with_history();
    let record = simulate_trajectory(model, &mut policy, seed)?;
    let decision_times = (0..policy.costs.len())
        .map(|k| (k * policy.apply) as f64 * model.dt)
        .collect();
    let gamma_estimates = contraction_monitor(&policy.costs, 0)
        .map(|r| r.gamma)
        .unwrap_or_default();
    Ok((
        record,
        ClosedLoopRecord {
            decision_times,
            predicted_costs: policy.costs,
            decision_fidelity: policy.decision_fidelity,
            applied: policy.applied,
            gamma_estimates,
        },
    ))
}

/// Controlled ensemble; `mean_predicted_cost` holds `E[J_k]`.
pub fn closed_loop_ensemble(
    model: &ModelConfig,
    opts: &OptimizerOptions,
    n_paths: usize,
    seed: u64,
    ens: &EnsembleOptions,
) -> Result<EnsembleStats> {
    let template = SmpcPolicy::new(model, opts.clone())?;
    monte_carlo_ensemble(model, |_| Ok(template.clone()), n_paths, seed, ens)
}

/// Ensemble with `u = 0`.
pub fn run_uncontrolled(
    model: &ModelConfig,
    n_paths: usize,
    seed: u64,
    ens: &EnsembleOptions,
) -> Result<EnsembleStats> {
    let zero = ZeroControl::new(model)?;
    monte_carlo_ensemble(model, |_| Ok(zero.clone()), n_paths, seed, ens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// `E[J_{k+1}] / E[J_k]`, stopping where `E[J_k] < 1e-12`.
    pub gamma: Vec<f64>,
    /// `sup gamma < 1` over the estimates after the burn-in.
    pub contracting: bool,
}

pub(crate) const CONVERGED_COST: f64 = 1e-12;

/// Empirical contraction factors of a predicted-cost sequence.
pub fn contraction_monitor(costs: &[f64], burn_in: usize) -> Result<ContractionReport> {
    if costs.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: costs.len(),
        });
    }
    let mut gamma = Vec::new();
    for w in costs.windows(2) {
        if w[0] < CONVERGED_COST {
            break;
        }
        gamma.push(w[1] / w[0]);
    }
    let considered = gamma.iter().skip(burn_in);
    let sup = considered.clone().copied().fold(f64::NEG_INFINITY, f64::max);
    let contracting = considered.count() > 0 && sup < 1.0;
    Ok(ContractionReport { gamma, contracting })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_examples() {
        let r = contraction_monitor(&[1.4, 0.7, 0.35], 0).unwrap();
        assert_eq!(r.gamma, vec![0.5, 0.5]);
        assert!(r.contracting);
        let r = contraction_monitor(&[0.3, 0.3, 0.3], 0).unwrap();
        assert_eq!(r.gamma, vec![1.0, 1.0]);
        assert!(!r.contracting);
        let r = contraction_monitor(&[0.5, 1e-13, 0.2], 0).unwrap();
        assert_eq!(r.gamma.len(), 1);
        assert!(contraction_monitor(&[1.0], 0).is_err());
        let r = contraction_monitor(&[1.0, 1.2, 0.6, 0.3], 1).unwrap();
        assert!(r.contracting);
    }

    #[test]
    fn target_start_stays_on_target() {
        let model = ModelConfig {
            rho0: crate::quantum::DensityMatrix::basis_state(3, 2),
            t_final: 2.0,
            ..ModelConfig::three_level()
        };
        let (rec, cl) = run_closed_loop(&model, &OptimizerOptions::default(), 5).unwrap();
        assert!(rec.fidelity.iter().all(|f| *f >= 0.99));
        assert_eq!(cl.predicted_costs.len(), 4);
        assert_eq!(cl.applied.len(), 4);
    }
}
