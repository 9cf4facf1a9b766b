//! Property-based checks of the geometric identities on random Hamiltonian families.

use adiageo::dynamics::{self, PropagationOptions};
use adiageo::ham::{commutator_norm_identity_check, projector_derivative};
use adiageo::linalg::{max_abs_entry, trace_product};
use adiageo::metric::{self, MetricSample, PathQuadrature, TauQuadrature};
use adiageo::models::{DegenerateModel, RandomModel, ShiftedModel};
use adiageo::schedule::{PerturbedSchedule, Reparametrized};
use adiageo::sweep::Execution;
use adiageo::{HamiltonianModel, LinearSchedule, Schedule, SpectralOptions};
use proptest::prelude::*;

fn opts() -> SpectralOptions {
    SpectralOptions::default()
}

fn model_and_point() -> impl Strategy<Value = (RandomModel, Vec<f64>, Vec<f64>)> {
    (2usize..=6, 1usize..=3, any::<u64>()).prop_flat_map(|(dim, params, seed)| {
        (
            Just(RandomModel::new(dim, params, seed)),
            prop::collection::vec(-1.0f64..1.0, params),
            prop::collection::vec(-1.0f64..1.0, params),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_is_real_part_of_geometric_tensor((model, x, _) in model_and_point()) {
        let sample = MetricSample::compute(&model, &x, &opts(), true, false).unwrap();
        let g_proj = metric::metric_projector_form(&model, &x, &opts()).unwrap();
        let re = sample.geometric.as_ref().unwrap().map(|z| z.re);
        prop_assert!((re - &g_proj).amax() < 1e-9);
        prop_assert!(sample.invariant_defect() < 1e-10);
    }

    #[test]
    fn bures_metric_is_eight_times_metric((model, x, _) in model_and_point()) {
        let g = metric::metric_tensor(&model, &x, &opts()).unwrap();
        let b = metric::bures_metric(&model, &x, &opts()).unwrap();
        prop_assert!((b - g * 8.0).amax() < 1e-9);
    }

    #[test]
    fn integral_form_matches_spectral_form((model, x, _) in model_and_point()) {
        let g = metric::geometric_tensor(&model, &x, &opts()).unwrap();
        let numeric = metric::geometric_tensor_integral(&model, &x, TauQuadrature::Numeric { rel_tol: 1e-12 }, &opts()).unwrap();
        let analytic = metric::geometric_tensor_integral(&model, &x, TauQuadrature::Analytic, &opts()).unwrap();
        prop_assert!(max_abs_entry(&(numeric - &g)) < 1e-8);
        prop_assert!(max_abs_entry(&(analytic - &g)) < 1e-10);
    }

    #[test]
    fn commutator_norm_identity((model, x, v) in model_and_point()) {
        let (lhs, rhs) = commutator_norm_identity_check(&model, &x, &v, &opts()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.max(1.0));
    }

    #[test]
    fn metric_trace_is_real((model, x, _) in model_and_point()) {
        let m = x.len();
        let dp: Vec<_> = (0..m).map(|i| projector_derivative(&model, &x, i, &opts()).unwrap()).collect();
        for a in &dp {
            for b in &dp {
                prop_assert!(trace_product(a, b).im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_shift_leaves_geometry_unchanged(
        (model, x, _) in model_and_point(),
        c in -5.0f64..5.0,
        lin in -2.0f64..2.0,
        quad in -2.0f64..2.0,
    ) {
        let m = x.len();
        let shifted = ShiftedModel::new(&model, c, vec![lin; m], vec![quad; m]);
        let a = MetricSample::compute(&model, &x, &opts(), true, false).unwrap();
        let b = MetricSample::compute(&shifted, &x, &opts(), true, false).unwrap();
        prop_assert!((a.g - b.g).amax() < 1e-10);
        prop_assert!(max_abs_entry(&(a.geometric.unwrap() - b.geometric.unwrap())) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn error_functional_forms_agree_and_are_shift_invariant((model, x0, x1) in model_and_point()) {
        let sched = LinearSchedule::new(x0, x1).unwrap();
        let quad = PathQuadrature { rel_tol: 1e-10, execution: Execution::Sequential, ..Default::default() };
        let acc = metric::path_error_functional(&model, &sched, &opts(), &quad).unwrap();
        prop_assert!((acc.eps_total - acc.eps_frobenius).abs() <= 1e-7 * acc.eps_total.max(1.0));
        // g0 = 1: the Frobenius norm of [P', P] is sqrt(2) times its operator norm.
        prop_assert!((acc.eps_total - 2f64.sqrt() * acc.eps_tilde_total).abs() <= 1e-7 * acc.eps_total.max(1.0));
        let m = sched.param_dim();
        let shifted = ShiftedModel::new(&model, 0.3, vec![1.1; m], vec![-0.7; m]);
        let acc2 = metric::path_error_functional(&shifted, &sched, &opts(), &quad).unwrap();
        prop_assert!((acc.eps_total - acc2.eps_total).abs() < 1e-10);
    }

    #[test]
    fn error_functional_is_reparametrization_invariant((model, x0, x1) in model_and_point(), a in 0.1f64..0.9) {
        let sched = LinearSchedule::new(x0, x1).unwrap();
        // phi(s) = s + a s (1 - s) / 2 is monotone on [0, 1] for |a| < 2.
        let warped = Reparametrized::new(sched.clone(), move |s| (s + 0.5 * a * s * (1.0 - s), 1.0 + 0.5 * a * (1.0 - 2.0 * s)));
        let quad = PathQuadrature { rel_tol: 1e-10, execution: Execution::Sequential, ..Default::default() };
        let e1 = metric::path_error_functional(&model, &sched, &opts(), &quad).unwrap().eps_total;
        let e2 = metric::path_error_functional(&model, &warped, &opts(), &quad).unwrap().eps_total;
        prop_assert!((e1 - e2).abs() <= 1e-7 * e1.max(1.0));
    }

    #[test]
    fn propagation_respects_fidelity_and_dyson_bounds(
        (model, x0, x1) in model_and_point(),
        t in 1.0f64..15.0,
        amp in prop::collection::vec(-0.2f64..0.2, 2),
    ) {
        let m = x0.len();
        let base = LinearSchedule::new(x0, x1).unwrap();
        let sched = PerturbedSchedule::new(base, vec![amp; m]).unwrap();
        let quad = PathQuadrature { execution: Execution::Sequential, ..Default::default() };
        let acc = metric::path_error_functional(&model, &sched, &opts(), &quad).unwrap();
        let popts = PropagationOptions { record: 512, execution: Execution::Sequential, ..Default::default() };
        let result = dynamics::run(&model, &sched, t, &popts).unwrap();
        let n = model.dim() as f64;
        for (s, f) in result.s.iter().zip(result.fidelity()) {
            prop_assert!(f <= 1.0 + 1e-12);
            prop_assert!(f >= 1.0 - acc.eps_at(*s) / n.sqrt() - 1e-9);
        }
        let ladder = dynamics::dyson_ladder_from(&model, &sched, &result, 1, &opts()).unwrap();
        for (o1, et) in ladder.norms[1].iter().zip(&ladder.eps_tilde) {
            prop_assert!(*o1 <= et + 1e-12);
        }
        let v_ad = dynamics::propagate_adiabatic(&model, &sched, t, &popts).unwrap();
        prop_assert!(dynamics::intertwining_residual(&model, &sched, &v_ad, &opts()).unwrap() < 1e-7);
    }
}

#[test]
fn degenerate_ground_space_sandwich() {
    // With g0 = 2 the sharp relation is sqrt(2) eps~ <= eps <= sqrt(2 g0) eps~.
    for seed in 0..6 {
        let model = DegenerateModel::new(5, 2, seed);
        let sched = LinearSchedule::new(vec![-0.7, 0.2], vec![0.8, -0.5]).unwrap();
        let acc = metric::path_error_functional(&model, &sched, &opts(), &PathQuadrature::default()).unwrap();
        assert_eq!(acc.g0, 2);
        let (eps, et) = (acc.eps_total, acc.eps_tilde_total);
        assert!(2f64.sqrt() * et <= eps * (1.0 + 1e-8), "seed {seed}: {eps} vs {et}");
        assert!(eps <= 2.0 * et * (1.0 + 1e-8), "seed {seed}: {eps} vs {et}");
        assert!((eps - acc.eps_frobenius).abs() <= 1e-7 * eps);
    }
}
