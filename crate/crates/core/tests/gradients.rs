mod common;

use proptest::prelude::*;
use qfgn::circuit::{evaluate, CircuitSpec, Gate, ParamRole, ParamStore};
use qfgn::grad::{adjoint_gradient, encoding_shift, finite_diff, param_shift};
use qfgn::qsim::GateKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_circuit, rel_err};

fn z(spec: &CircuitSpec, x: &[f64], theta: &[f64], q: usize) -> f64 {
    evaluate(spec, x, &ParamStore { theta: theta.to_vec() }, 0, 0).unwrap()[q]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn param_shift_matches_finite_differences(seed in any::<u64>(), n in 1usize..=3, gates in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_circuit(&mut rng, n, gates, 1);
        let theta = ParamStore::random(&spec, &mut rng);
        let x = vec![0.37; spec.e_count()];
        for q in 0..n {
            for k in 0..spec.t_count() {
                let ps = param_shift(&spec, &x, &theta, q, k).unwrap();
                let fd = finite_diff(|t| z(&spec, &x, t, q), &theta.theta, k, 1e-4).unwrap();
                prop_assert!(rel_err(ps, fd, 1e-3) < 1e-5, "q{q} k{k}: {ps} vs {fd}");
            }
            for j in 0..spec.e_count() {
                let es = encoding_shift(&spec, &x, &theta, q, j).unwrap();
                let fd = finite_diff(|v| z(&spec, v, &theta.theta, q), &x, j, 1e-4).unwrap();
                prop_assert!(rel_err(es, fd, 1e-3) < 1e-5);
            }
        }
    }

    #[test]
    fn adjoint_matches_param_shift(seed in any::<u64>(), n in 1usize..=4, gates in 2usize..=24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_circuit(&mut rng, n, gates, 2);
        let theta = ParamStore::random(&spec, &mut rng);
        let x: Vec<f64> = (0..spec.e_count()).map(|i| 0.4 - 0.9 * i as f64).collect();
        let w: Vec<f64> = (0..n).map(|q| 1.0 - 0.5 * q as f64).collect();
        let (dt, dx) = adjoint_gradient(&spec, &x, &theta, &w).unwrap();
        for k in 0..spec.t_count() {
            let ps: f64 = (0..n).map(|q| w[q] * param_shift(&spec, &x, &theta, q, k).unwrap()).sum();
            prop_assert!((dt[k] - ps).abs() < 1e-10);
        }
        for j in 0..spec.e_count() {
            let es: f64 = (0..n).map(|q| w[q] * encoding_shift(&spec, &x, &theta, q, j).unwrap()).sum();
            prop_assert!((dx[j] - es).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_is_linear_in_the_observable(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_circuit(&mut rng, 3, 12, 1);
        let theta = ParamStore::random(&spec, &mut rng);
        let x = vec![1.1; spec.e_count()];
        let (f, _) = adjoint_gradient(&spec, &x, &theta, &[1.0, 0.0, 0.0]).unwrap();
        let (g, _) = adjoint_gradient(&spec, &x, &theta, &[0.0, 0.0, 1.0]).unwrap();
        let (h, _) = adjoint_gradient(&spec, &x, &theta, &[a, 0.0, b]).unwrap();
        for k in 0..spec.t_count() {
            prop_assert!((h[k] - (a * f[k] + b * g[k])).abs() < 1e-10);
            let fs = param_shift(&spec, &x, &theta, 0, k).unwrap();
            let gs = param_shift(&spec, &x, &theta, 2, k).unwrap();
            prop_assert!((h[k] - (a * fs + b * gs)).abs() < 1e-10);
        }
    }
}

#[test]
fn rz_only_circuit_has_zero_gradient_at_zero() {
    let gates: Vec<Gate> = (0..6)
        .map(|i| Gate::one(GateKind::Rz, i % 3, ParamRole::Trainable(i)))
        .collect();
    let spec = CircuitSpec::new(3, gates).unwrap();
    let theta = ParamStore::zeros(&spec);
    for q in 0..3 {
        for k in 0..6 {
            assert_eq!(param_shift(&spec, &[], &theta, q, k).unwrap(), 0.0);
        }
    }
}
