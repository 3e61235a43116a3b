mod common;

use common::*;
use qsmpc_core::lindblad::{propagate_costate, propagate_state, DissipatorSign, HorizonGrid};
use qsmpc_core::linalg;
use qsmpc_core::model::ModelConfig;
use qsmpc_core::pmp::{switching_function, ControlSchedule};
use qsmpc_core::quantum::{angular_momentum_ops, DensityMatrix, HermitianOperator};
use qsmpc_core::trajectory::{monte_carlo_ensemble, DecisionContext, EnsembleOptions};

fn dense_model(seed: u64) -> ModelConfig {
    let mut r = rng(seed);
    ModelConfig {
        h0: random_hermitian(3, &mut r),
        hc: random_hermitian(3, &mut r),
        l: random_hermitian(3, &mut r).scaled(0.6),
        target: HermitianOperator::identity(3),
        rho0: random_state(3, &mut r),
        ..ModelConfig::three_level()
    }
}

fn terminal(model: &ModelConfig, dt: f64, u: f64) -> DensityMatrix {
    let grid = HorizonGrid::new(0.0, 1.0, dt).unwrap();
    let sched = ControlSchedule::constant(grid.steps, u, -5.0, 5.0).unwrap();
    propagate_state(&model.rho0, &sched, &grid, model).unwrap().pop().unwrap()
}

#[test]
fn propagation_is_fourth_order() {
    let model = dense_model(4);
    let reference = terminal(&model, 1.0 / 1280.0, 0.7);
    let err = |dt| linalg::max_abs_diff(terminal(&model, dt, 0.7).matrix(), reference.matrix());
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn diagonal_costate_is_stationary_without_control() {
    let s = angular_momentum_ops(1.0).unwrap();
    let model = ModelConfig::three_level();
    let grid = model.horizon_grid(0.0);
    let sched = ControlSchedule::zeros(grid.steps, -5.0, 5.0).unwrap();
    let lambda_t = model.target.scaled(-2.0);
    let costate = propagate_costate(&lambda_t, &sched, &grid, &model, DissipatorSign::Minus).unwrap();
    for lam in &costate {
        assert!(linalg::max_abs_diff(lam.matrix(), lambda_t.matrix()) < 1e-14);
    }
    let rho = DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).unwrap();
    assert_eq!(switching_function(&costate[0], &rho, &s.jy).unwrap(), 0.0);
}

#[test]
fn costate_pairing_is_conserved() {
    // d/dt Tr(lambda rho) = 0 along forward and adjoint flows.
    let model = dense_model(9);
    let grid = HorizonGrid::new(0.0, 0.5, 0.005).unwrap();
    let sched = ControlSchedule::new((0..grid.steps).map(|k| (k as f64 * 0.1).cos()).collect(), -5.0, 5.0).unwrap();
    let mut r = rng(10);
    let lambda_t = random_hermitian(3, &mut r);
    let states = propagate_state(&model.rho0, &sched, &grid, &model).unwrap();
    let costate = propagate_costate(&lambda_t, &sched, &grid, &model, DissipatorSign::Minus).unwrap();
    let pair = |k: usize| linalg::trace_product(costate[k].matrix(), states[k].matrix()).re;
    let end = pair(grid.steps);
    for k in 0..grid.steps {
        assert!((pair(k) - end).abs() < 1e-8, "step {k}: {} vs {end}", pair(k));
    }
}

#[test]
fn ensemble_mean_tracks_averaged_state() {
    let model = ModelConfig {
        t_final: 2.0,
        ..ModelConfig::three_level()
    };
    let u = 1.0;
    let h = model.horizon_steps();
    let stats = monte_carlo_ensemble(
        &model,
        |_| Ok(move |_: &DecisionContext<'_>| ControlSchedule::constant(h, u, -5.0, 5.0)),
        2000,
        21,
        &EnsembleOptions {
            record_every: 50,
            ..Default::default()
        },
    )
    .unwrap();
    let grid = HorizonGrid::new(0.0, model.t_final, model.dt).unwrap();
    let sched = ControlSchedule::constant(grid.steps, u, -5.0, 5.0).unwrap();
    let avg = propagate_state(&model.rho0, &sched, &grid, &model).unwrap();
    for (i, t) in stats.times.iter().enumerate() {
        let k = (t / model.dt).round() as usize;
        let expected = avg[k].expectation(&model.target);
        // first-order Kraus scheme: allow an O(dt) bias on top of sampling error
        let tol = 3.0 * stats.stderr_fidelity[i] + model.dt;
        assert!(
            (stats.mean_fidelity[i] - expected).abs() <= tol,
            "t = {t}: {} vs {expected}",
            stats.mean_fidelity[i]
        );
    }
}
