mod common;

use proptest::prelude::*;
use qfgn::fgfs::{amplitude_bound, gaussian_gate};
use qfgn::imaging::{make_grid, Image, ImageGrid};
use qfgn::models::{build_model, Model, ModelKind};
use qfgn::nn::{BatchNorm, Matrix, Mode};
use qfgn::train::{fit, mse, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::rel_err;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn parameter_budgets() {
    let expect = [(ModelKind::Qfgn, 585), (ModelKind::Relu, 841), (ModelKind::Tanh, 841), (ModelKind::RffRelu, 791), (ModelKind::Siren, 701)];
    for (kind, n) in expect {
        for seed in [0, 9] {
            assert_eq!(build_model(kind, seed).trainable_count(), n, "{kind}");
        }
    }
}

proptest! {
    #[test]
    fn gate_never_exceeds_amplitude_bound(h in -50.0f64..50.0, gamma in 0.05f64..5.0) {
        prop_assert!(gaussian_gate(h, gamma).abs() <= amplitude_bound(gamma) * (1.0 + 1e-15));
    }

    #[test]
    fn large_activations_are_attenuated_more(b in 0.0f64..5.0, extra in 1e-3f64..5.0) {
        let gamma = 0.8;
        let b = b + 1.0 / (2.0 * gamma as f64).sqrt();
        let a = b + extra;
        prop_assert!(gaussian_gate(a, gamma).abs() < gaussian_gate(b, gamma).abs());
        prop_assert!(gaussian_gate(-a, gamma).abs() < gaussian_gate(-b, gamma).abs());
    }

    #[test]
    fn batch_norm_standardizes(seed in any::<u64>(), rows in 2usize..64, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = 4;
        let data: Vec<f64> = (0..rows * f).map(|i| scale * rng.random_range(-1.0..1.0) + (i % f) as f64).collect();
        let bn = BatchNorm::new("bn", f);
        let (y, _, var, _) = bn.normalize_batch(&Matrix::from_vec(rows, f, data).unwrap()).unwrap();
        for c in 0..f {
            let col: Vec<f64> = (0..rows).map(|r| y.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let v = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-6);
            // eps keeps nearly constant columns from reaching unit variance
            let expect = var[c] / (var[c] + 1e-5);
            prop_assert!((v - expect).abs() < 1e-6, "{v} vs {expect}");
        }
    }
}

#[test]
fn forward_passes_are_deterministic() {
    let coords = make_grid(6, 5);
    for kind in ModelKind::ALL {
        let mut a = build_model(kind, 4);
        let mut b = build_model(kind, 4);
        let ya = a.forward(&coords, Mode::Train).unwrap();
        let yb = b.forward(&coords, Mode::Train).unwrap();
        assert_eq!(bits(&ya), bits(&yb), "{kind}");
        assert_eq!(bits(&a.infer(&coords).unwrap()), bits(&a.infer(&coords).unwrap()), "{kind}");
    }
}

fn train_loss(model: &mut Model, grid: &ImageGrid) -> f64 {
    let pred = model.forward(&grid.coords, Mode::Train).unwrap();
    mse(&pred, &grid.targets).unwrap()
}

fn check_loss_gradient(kind: ModelKind, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels: Vec<f64> = (0..36).map(|_| rng.random_range(0.0..1.0)).collect();
    let grid = ImageGrid::from_image(&Image::new(6, 6, pixels).unwrap());
    let mut model = build_model(kind, seed);
    let pred = model.forward(&grid.coords, Mode::Train).unwrap();
    let n = grid.len() as f64;
    let up: Vec<f64> = pred.iter().zip(&grid.targets).map(|(p, t)| 2.0 * (p - t) / n).collect();
    let grad = model.backward(&up).unwrap();
    let base = model.trainable_values();
    for _ in 0..10 {
        let i = rng.random_range(0..base.len());
        let h = 1e-4;
        let mut at = |v: f64| {
            let mut p = base.clone();
            p[i] = v;
            model.set_trainable_values(&p).unwrap();
            train_loss(&mut model, &grid)
        };
        let fd = (at(base[i] + h) - at(base[i] - h)) / (2.0 * h);
        assert!(rel_err(grad.values[i], fd, 1e-3) < 1e-3, "{kind} param {i}: {} vs {fd}", grad.values[i]);
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    for kind in ModelKind::ALL {
        check_loss_gradient(kind, 21);
    }
}

#[test]
fn training_is_deterministic() {
    let grid = ImageGrid::from_image(&Image::new(4, 4, (0..16).map(|i| i as f64 / 15.0).collect()).unwrap());
    let cfg = TrainConfig { epochs: 30, ..TrainConfig::default() };
    for kind in [ModelKind::Relu, ModelKind::Qfgn] {
        let mut a = build_model(kind, 2);
        let mut b = build_model(kind, 2);
        assert_eq!(bits(&fit(&mut a, &grid, &cfg).unwrap()), bits(&fit(&mut b, &grid, &cfg).unwrap()));
    }
}

#[test]
fn constant_image_loss_trends_down() {
    let grid = ImageGrid::from_image(&Image::constant(8, 8, 0.6).unwrap());
    let mut m = build_model(ModelKind::Qfgn, 0);
    let hist = fit(&mut m, &grid, &TrainConfig::default()).unwrap();
    let avg: Vec<f64> = hist.windows(50).map(|w| w.iter().sum::<f64>() / 50.0).collect();
    let tail = &avg[avg.len() - 500..];
    for w in tail.windows(2) {
        assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
    }
    assert!(hist[hist.len() - 1] < 1e-4);
}
