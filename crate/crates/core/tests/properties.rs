mod common;

use common::*;
use proptest::prelude::*;
use qsmpc_core::bloch::{ball_radius, bloch_to_rho, generalized_gell_mann, rho_to_bloch};
use qsmpc_core::lindblad::{propagate_state, HorizonGrid};
use qsmpc_core::linalg;
use qsmpc_core::model::ModelConfig;
use qsmpc_core::pmp::{bang_bang_extract, reduced_cost, ControlSchedule};
use qsmpc_core::quantum::{fidelity, HermitianOperator};
use qsmpc_core::stats::SeriesMoments;
use qsmpc_core::trajectory::{kraus_step, SdeStepConfig};

fn model(seed: u64, n: usize) -> ModelConfig {
    let mut r = rng(seed);
    ModelConfig {
        h0: random_hermitian(n, &mut r),
        hc: random_hermitian(n, &mut r),
        l: random_hermitian(n, &mut r).scaled(0.5),
        target: HermitianOperator::identity(n),
        rho0: random_state(n, &mut r),
        ..ModelConfig::three_level()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn averaged_flow_keeps_states_valid(
        seed in any::<u64>(),
        n in 2usize..5,
        u in proptest::collection::vec(-5.0f64..5.0, 20),
    ) {
        let m = model(seed, n);
        let grid = HorizonGrid::new(0.0, 0.2, 0.01).unwrap();
        let sched = ControlSchedule::new(u, -5.0, 5.0).unwrap();
        let states = propagate_state(&m.rho0, &sched, &grid, &m).unwrap();
        for s in &states {
            prop_assert!((s.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(linalg::hermitian_deviation(s.matrix()) < 1e-12);
            prop_assert!(s.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn kraus_update_keeps_states_valid(
        seed in any::<u64>(),
        n in 2usize..5,
        eta in 0.0f64..=1.0,
        dy in -0.3f64..0.3,
    ) {
        let m = model(seed, n);
        let cfg = SdeStepConfig { dt: 0.01, eta, seed };
        let next = kraus_step(&m.rho0, &m.h0, &m.l, &cfg, dy).unwrap();
        prop_assert!((next.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(next.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn reduced_cost_is_bounded_and_matches_fidelity(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let rho = random_state(n, &mut r);
        let target = random_pure_projector(n, &mut r);
        let j = reduced_cost(&rho, &target).unwrap();
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&j));
        let f = fidelity(&rho, &target).unwrap();
        prop_assert!((j - 2.0 * (1.0 - f)).abs() < 1e-12);
    }

    #[test]
    fn coherent_vector_roundtrip(seed in any::<u64>(), n in 2usize..6) {
        let basis = generalized_gell_mann(n).unwrap();
        let rho = random_state(n, &mut rng(seed));
        let x = rho_to_bloch(&rho, &basis).unwrap();
        prop_assert!(x.norm() <= ball_radius(n) + 1e-12);
        let back = bloch_to_rho(&x, &basis).unwrap();
        prop_assert!(linalg::max_abs_diff(back.matrix(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn schedules_stay_in_bounds(
        values in proptest::collection::vec(-10.0f64..10.0, 1..40),
        switching in proptest::collection::vec(-1.0f64..1.0, 40),
        shift in 0usize..50,
    ) {
        let base = ControlSchedule::constant(values.len(), values[0], -5.0, 5.0).unwrap();
        prop_assert!(base.values().iter().all(|u| (-5.0..=5.0).contains(u)));
        let shifted = base.shifted(shift);
        prop_assert_eq!(shifted.len(), base.len());
        let s = &switching[..values.len()];
        let bb = bang_bang_extract(s, &base, 0.1).unwrap();
        for ((u, &sw), &sing) in bb.schedule.values().iter().zip(s).zip(&bb.singular) {
            if sing {
                prop_assert_eq!(*u, base.values()[0]);
            } else {
                prop_assert_eq!(*u, if sw < 0.0 { 5.0 } else { -5.0 });
            }
        }
    }

    #[test]
    fn moments_merge_in_any_split(xs in proptest::collection::vec(-1e3f64..1e3, 2..60), cut in 0usize..60) {
        let cut = cut.min(xs.len());
        let mut whole = SeriesMoments::new();
        xs.iter().for_each(|x| whole.push(&[*x]));
        let (mut a, mut b) = (SeriesMoments::new(), SeriesMoments::new());
        xs[..cut].iter().for_each(|x| a.push(&[*x]));
        xs[cut..].iter().for_each(|x| b.push(&[*x]));
        a.merge(&b);
        prop_assert!((a.mean()[0] - whole.mean()[0]).abs() < 1e-9);
        prop_assert!((a.stderr()[0] - whole.stderr()[0]).abs() < 1e-9);
    }
}
