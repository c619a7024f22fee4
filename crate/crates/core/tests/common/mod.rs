#![allow(dead_code)]

use std::f64::consts::TAU;

use qfgn::circuit::{CircuitSpec, Gate, ParamRole};
use qfgn::qsim::{GateKind, Statevector};
use rand::Rng;

pub const ROTATIONS: [GateKind; 3] = [GateKind::Rx, GateKind::Ry, GateKind::Rz];

/// Random gate `(kind, qubits, angle)` on `n` qubits.
pub fn random_gate(rng: &mut impl Rng, n: usize) -> (GateKind, Vec<usize>, Option<f64>) {
    let kinds: &[GateKind] = if n >= 2 { &GateKind::ALL } else { &GateKind::ALL[1..] };
    let kind = kinds[rng.random_range(0..kinds.len())];
    let a = rng.random_range(0..n);
    let qubits = if kind == GateKind::Cz {
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        vec![a, b]
    } else {
        vec![a]
    };
    let angle = kind.is_parameterized().then(|| rng.random_range(-TAU..TAU));
    (kind, qubits, angle)
}

/// Normalized random state on `n` qubits.
pub fn random_state(rng: &mut impl Rng, n: usize) -> Statevector {
    let mut s = Statevector::new(n).unwrap();
    for _ in 0..4 * n {
        let (k, q, a) = random_gate(rng, n);
        s.apply_gate(k, &q, a).unwrap();
    }
    s
}

/// Random circuit with dense trainable indices and `features` encoding
/// indices (each used at least once when `gates >= features`).
pub fn random_circuit(rng: &mut impl Rng, n: usize, gates: usize, features: usize) -> CircuitSpec {
    let mut out = Vec::with_capacity(gates);
    let mut t = 0;
    let mut e = 0;
    for _ in 0..gates {
        let (kind, q, _) = random_gate(rng, n);
        let g = match kind {
            GateKind::Cz => Gate::cz(q[0], q[1]),
            k if k.is_parameterized() => {
                if e < features && (rng.random_bool(0.4) || gates - out.len() <= features - e) {
                    e += 1;
                    Gate::one(k, q[0], ParamRole::Encoding(e - 1))
                } else if features > 0 && e == features && rng.random_bool(0.3) {
                    Gate::one(k, q[0], ParamRole::Encoding(rng.random_range(0..features)))
                } else {
                    t += 1;
                    Gate::one(k, q[0], ParamRole::Trainable(t - 1))
                }
            }
            k => Gate::one(k, q[0], ParamRole::Fixed),
        };
        out.push(g);
    }
    CircuitSpec::new(n, out).unwrap()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
