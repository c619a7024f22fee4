use proptest::prelude::*;
use qfgn::circuit::{CircuitSpec, Gate, ParamRole};
use qfgn::qsim::GateKind;
use qfgn::spectral::{empirical_spectrum, predict_spectrum, verify_spectrum, SpectrumQuery};

const AXES: [GateKind; 3] = [GateKind::Rx, GateKind::Ry, GateKind::Rz];

/// Single-feature layered circuit: trainable layer, then `layers` rounds of
/// (encoding on every qubit in `enc_axis`, CZ chain, trainable layer).
fn layered(n: usize, layers: usize, enc_axis: usize, per_layer_encodings: usize) -> CircuitSpec {
    let mut gates = Vec::new();
    let mut t = 0;
    let mut train = |gates: &mut Vec<Gate>| {
        for q in 0..n {
            for axis in [GateKind::Ry, GateKind::Rz] {
                gates.push(Gate::one(axis, q, ParamRole::Trainable(t)));
                t += 1;
            }
        }
    };
    train(&mut gates);
    for _ in 0..layers {
        for q in 0..per_layer_encodings {
            gates.push(Gate::one(AXES[enc_axis], q % n, ParamRole::Encoding(0)));
        }
        for q in 0..n.saturating_sub(1) {
            gates.push(Gate::cz(q, q + 1));
        }
        train(&mut gates);
    }
    CircuitSpec::new(n, gates).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn support_is_contained_and_cardinality_holds(
        n in 1usize..=3, layers in 1usize..=3, axis in 0usize..3, seed in any::<u64>(), alpha in 1u32..=3,
    ) {
        let spec = layered(n, layers, axis, 1);
        let mut q = SpectrumQuery::new(spec);
        q.scaling = vec![alpha as f64];
        q.output = (seed % n as u64) as usize;
        let report = verify_spectrum(&q, 3, seed, 0).unwrap();
        prop_assert_eq!(report.predicted.frequencies.len(), 2 * layers + 1);
        prop_assert_eq!(report.predicted.raw_combinations, 4f64.powi(layers as i32));
        prop_assert!(report.max_leakage < 1e-8);
        let max = report.predicted.frequencies.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        prop_assert!((max - (alpha as usize * layers) as f64).abs() < 1e-12);
    }

    #[test]
    fn coefficients_are_conjugate_symmetric(n in 1usize..=3, layers in 1usize..=3, seed in any::<u64>()) {
        let spec = layered(n, layers, 0, n);
        let report = verify_spectrum(&SpectrumQuery::new(spec), 1, seed, 0).unwrap();
        let lines = &report.coefficients;
        for l in lines {
            let mirror = lines.iter().find(|m| (m.frequency + l.frequency).abs() < 1e-9).unwrap();
            prop_assert!((l.coefficient - mirror.coefficient.conj()).norm() < 1e-12);
        }
    }
}

#[test]
fn shared_feature_counts_every_encoding() {
    let spec = layered(3, 2, 1, 3);
    let p = predict_spectrum(&SpectrumQuery::new(spec)).unwrap();
    assert_eq!(p.encoding_gates, 6);
    assert_eq!(p.frequencies.len(), 13);
}

#[test]
fn cosine_has_two_lines() {
    let lines = empirical_spectrum(|x| x.cos(), 3);
    for l in lines {
        let expect = if l.frequency.abs() == 1.0 { 0.5 } else { 0.0 };
        assert!((l.coefficient.re - expect).abs() < 1e-12 && l.coefficient.im.abs() < 1e-12);
    }
}
