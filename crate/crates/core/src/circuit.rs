//! Parameterized data re-uploading circuits.
//!
//! Text format, one statement per line, `#` starts a comment:
//!
//! ```text
//! qubits 2
//! rx 0 enc 0      # encoding rotation driven by feature 0
//! cz 0 1
//! ry 1 par 0      # trainable rotation theta[0]
//! ```

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qsim::{qubit_seed, sample_expectation, BatchState, GateKind, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamRole {
    /// Angle is feature `k` of the input.
    Encoding(usize),
    /// Angle is `theta[i]`.
    Trainable(usize),
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    targets: [usize; 2],
    pub role: ParamRole,
}

impl Gate {
    pub fn one(kind: GateKind, q: usize, role: ParamRole) -> Self {
        Gate {
            kind,
            targets: [q, usize::MAX],
            role,
        }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Gate {
            kind: GateKind::Cz,
            targets: [a, b],
            role: ParamRole::Fixed,
        }
    }

    pub fn qubits(&self) -> &[usize] {
        &self.targets[..self.kind.arity()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitSpec {
    n_qubits: usize,
    gates: Vec<Gate>,
    e_count: usize,
    t_count: usize,
}

impl CircuitSpec {
    /// Validates roles, qubit ranges, and density of the index sets.
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        Self::build(n_qubits, gates, |_| 0)
    }

    fn build(n_qubits: usize, gates: Vec<Gate>, line_of: impl Fn(usize) -> usize) -> Result<Self> {
        let err = |g: usize, msg: String| match line_of(g) {
            0 => Error::Config(msg),
            line => Error::parse(line, msg),
        };
        crate::qsim::check_qubit_count(n_qubits).map_err(|e| err(0, e.to_string()))?;
        let mut enc = Vec::new();
        let mut par = Vec::new();
        for (gi, g) in gates.iter().enumerate() {
            for (i, &q) in g.qubits().iter().enumerate() {
                if q >= n_qubits {
                    return Err(err(gi, format!("qubit {q} out of range (circuit has {n_qubits})")));
                }
                if g.qubits()[..i].contains(&q) {
                    return Err(err(gi, format!("duplicate qubit {q}")));
                }
            }
            if let ParamRole::Encoding(i) | ParamRole::Trainable(i) = g.role {
                // A dense index set can never exceed the gate count.
                if i >= gates.len() {
                    return Err(err(gi, format!("index set not dense: {i} exceeds the gate count")));
                }
            }
            match (g.kind.is_parameterized(), g.role) {
                (true, ParamRole::Encoding(k)) => mark(&mut enc, k),
                (true, ParamRole::Trainable(i)) => mark(&mut par, i),
                (false, ParamRole::Fixed) => {}
                (true, ParamRole::Fixed) => {
                    return Err(err(gi, format!("{} needs an enc or par angle", g.kind.name())))
                }
                (false, _) => {
                    return Err(err(gi, format!("{} does not take an angle", g.kind.name())))
                }
            }
        }
        let last = gates.len().max(1);
        if let Some(missing) = enc.iter().position(|seen| !seen) {
            return Err(err(last, format!("encoding indices not dense: missing {missing}")));
        }
        if let Some(missing) = par.iter().position(|seen| !seen) {
            return Err(err(last, format!("trainable indices not dense: missing {missing}")));
        }
        Ok(CircuitSpec {
            n_qubits,
            e_count: enc.len(),
            t_count: par.len(),
            gates,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn e_count(&self) -> usize {
        self.e_count
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    /// Number of gates driven by encoding feature `k`.
    pub fn encoding_multiplicity(&self, k: usize) -> usize {
        self.gates
            .iter()
            .filter(|g| g.role == ParamRole::Encoding(k))
            .count()
    }

    /// Rotation angle of `gate` for the given inputs.
    pub(crate) fn angle_of(&self, gate: &Gate, features: &[f64], theta: &[f64]) -> Option<f64> {
        match gate.role {
            ParamRole::Encoding(k) => Some(features[k]),
            ParamRole::Trainable(i) => Some(theta[i]),
            ParamRole::Fixed => None,
        }
    }

    /// Number of leading gates that precede the first encoding gate. Their
    /// action on `|0…0⟩` does not depend on the input.
    pub fn input_independent_prefix(&self) -> usize {
        self.gates
            .iter()
            .position(|g| matches!(g.role, ParamRole::Encoding(_)))
            .unwrap_or(self.gates.len())
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn mark(seen: &mut Vec<bool>, idx: usize) {
    if idx >= seen.len() {
        seen.resize(idx + 1, false);
    }
    seen[idx] = true;
}

impl fmt::Display for CircuitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n_qubits)?;
        for g in &self.gates {
            match (g.kind, g.role) {
                (GateKind::Cz, _) => writeln!(f, "cz {} {}", g.targets[0], g.targets[1])?,
                (k, ParamRole::Encoding(i)) => writeln!(f, "{} {} enc {i}", k.name(), g.targets[0])?,
                (k, ParamRole::Trainable(i)) => writeln!(f, "{} {} par {i}", k.name(), g.targets[0])?,
                (k, ParamRole::Fixed) => writeln!(f, "{} {}", k.name(), g.targets[0])?,
            }
        }
        Ok(())
    }
}

pub fn parse_circuit(text: &str) -> Result<CircuitSpec> {
    let mut n_qubits = None;
    let mut gates = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let index = |tok: &str| -> Result<usize> {
            tok.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("expected a non-negative integer, found `{tok}`")))
        };
        if n_qubits.is_none() {
            if tokens[0] != "qubits" || tokens.len() != 2 {
                return Err(Error::parse(line_no, "first statement must be `qubits <n>`"));
            }
            let n = index(tokens[1])?;
            crate::qsim::check_qubit_count(n).map_err(|e| Error::parse(line_no, e.to_string()))?;
            n_qubits = Some(n);
            continue;
        }
        if tokens[0] == "qubits" {
            return Err(Error::parse(line_no, "duplicate `qubits` statement"));
        }
        let kind = GateKind::from_name(tokens[0])
            .ok_or_else(|| Error::parse(line_no, format!("unknown gate `{}`", tokens[0])))?;
        let gate = match kind {
            GateKind::Cz => match tokens[1..] {
                [a, b] => Gate::cz(index(a)?, index(b)?),
                _ => return Err(Error::parse(line_no, "usage: cz <q1> <q2>")),
            },
            GateKind::X | GateKind::Sx => match tokens[1..] {
                [q] => Gate::one(kind, index(q)?, ParamRole::Fixed),
                _ => return Err(Error::parse(line_no, format!("usage: {} <q>", kind.name()))),
            },
            _ => match tokens[1..] {
                [q, "enc", k] => Gate::one(kind, index(q)?, ParamRole::Encoding(index(k)?)),
                [q, "par", i] => Gate::one(kind, index(q)?, ParamRole::Trainable(index(i)?)),
                _ => {
                    return Err(Error::parse(
                        line_no,
                        format!("usage: {} <q> enc|par <index>", kind.name()),
                    ))
                }
            },
        };
        gates.push(gate);
        lines.push(line_no);
    }
    let n_qubits = n_qubits.ok_or_else(|| Error::parse(1, "missing `qubits <n>` statement"))?;
    let last_line = text.lines().count().max(1);
    CircuitSpec::build(n_qubits, gates, |g| lines.get(g).copied().unwrap_or(last_line))
}

/// Layout parameters of the shipped default circuit.
pub const DEFAULT_QUBITS: usize = 8;
const DEFAULT_LAYER_PAIRS: usize = 16;
/// Trainable layer pairs placed before each of the two encoding layers.
const ENCODING_AFTER_PAIR: [usize; 2] = [6, 11];

/// Deterministic 8-qubit circuit with 16 encoding and 256 trainable rotations.
///
/// Sixteen trainable layer pairs, each an RY layer and an RZ layer over all
/// qubits followed by a CZ ring. Two RX encoding layers sit after pairs 6 and
/// 11; the first carries features 0..8, the second features 8..16.
pub fn generate_default_circuit() -> CircuitSpec {
    let n = DEFAULT_QUBITS;
    let mut gates = Vec::new();
    let mut t = 0;
    let mut next_feature = 0;
    for pair in 0..DEFAULT_LAYER_PAIRS {
        for kind in [GateKind::Ry, GateKind::Rz] {
            for q in 0..n {
                gates.push(Gate::one(kind, q, ParamRole::Trainable(t)));
                t += 1;
            }
        }
        for q in 0..n {
            gates.push(Gate::cz(q, (q + 1) % n));
        }
        if ENCODING_AFTER_PAIR.contains(&(pair + 1)) {
            for q in 0..n {
                gates.push(Gate::one(GateKind::Rx, q, ParamRole::Encoding(next_feature)));
                next_feature += 1;
            }
        }
    }
    CircuitSpec::new(n, gates).expect("default circuit is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub theta: Vec<f64>,
}

impl ParamStore {
    pub fn zeros(spec: &CircuitSpec) -> Self {
        ParamStore {
            theta: vec![0.0; spec.t_count()],
        }
    }

    /// Angles drawn uniformly from [0, 2π).
    pub fn random(spec: &CircuitSpec, rng: &mut impl Rng) -> Self {
        ParamStore {
            theta: (0..spec.t_count())
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect(),
        }
    }
}

fn check_lengths(spec: &CircuitSpec, features: &[f64], theta: &[f64]) -> Result<()> {
    if features.len() != spec.e_count() {
        return Err(Error::usage(format!(
            "expected {} features, got {}",
            spec.e_count(),
            features.len()
        )));
    }
    if theta.len() != spec.t_count() {
        return Err(Error::usage(format!(
            "expected {} trainable angles, got {}",
            spec.t_count(),
            theta.len()
        )));
    }
    Ok(())
}

/// Final statevector of `U(features, theta)|0…0⟩`.
pub fn run(spec: &CircuitSpec, features: &[f64], theta: &[f64]) -> Result<Statevector> {
    check_lengths(spec, features, theta)?;
    run_with_angles(spec, |_, g| spec.angle_of(g, features, theta))
}

/// Runs the circuit with the angle of every gate supplied by `angle`.
pub(crate) fn run_with_angles(
    spec: &CircuitSpec,
    angle: impl Fn(usize, &Gate) -> Option<f64>,
) -> Result<Statevector> {
    let mut state = Statevector::new(spec.n_qubits())?;
    for (gi, g) in spec.gates().iter().enumerate() {
        state.apply_gate(g.kind, g.qubits(), angle(gi, g))?;
    }
    Ok(state)
}

fn readout(state: &Statevector, shots: u64, seed: u64) -> Result<Vec<f64>> {
    (0..state.n_qubits())
        .map(|q| {
            if shots == 0 {
                state.expectation_z(q)
            } else {
                state.sample_z(q, shots, qubit_seed(seed, q))
            }
        })
        .collect()
}

/// Per-qubit ⟨Z⟩ of the circuit output, exact when `shots == 0`.
pub fn evaluate(
    spec: &CircuitSpec,
    features: &[f64],
    theta: &ParamStore,
    shots: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let state = run(spec, features, &theta.theta)?;
    readout(&state, shots, seed)
}

/// Lanes per batched simulation chunk.
pub(crate) const CHUNK_LANES: usize = 32;

/// Precomputed half-angle cosines and sines for every parameterized gate
/// over one chunk of lanes.
#[derive(Debug, Clone)]
pub(crate) struct ChunkAngles {
    pub cos: Vec<Vec<f64>>,
    pub sin: Vec<Vec<f64>>,
}

impl ChunkAngles {
    /// `features` is lane-major with `e_count` entries per lane.
    pub fn new(spec: &CircuitSpec, features: &[f64], theta: &[f64], lanes: usize) -> Self {
        let e = spec.e_count();
        let mut cos = Vec::with_capacity(spec.gates().len());
        let mut sin = Vec::with_capacity(spec.gates().len());
        for g in spec.gates() {
            let (c, s) = match g.role {
                ParamRole::Trainable(i) => {
                    let h = theta[i] / 2.0;
                    (vec![h.cos(); lanes], vec![h.sin(); lanes])
                }
                ParamRole::Encoding(k) => (0..lanes)
                    .map(|l| {
                        let h = features[l * e + k] / 2.0;
                        (h.cos(), h.sin())
                    })
                    .unzip(),
                ParamRole::Fixed => (Vec::new(), Vec::new()),
            };
            cos.push(c);
            sin.push(s);
        }
        ChunkAngles { cos, sin }
    }
}

pub(crate) fn apply_forward(spec: &CircuitSpec, state: &mut BatchState, angles: &ChunkAngles) {
    apply_gates(spec, 0..spec.gates().len(), state, angles)
}

pub(crate) fn apply_gates(
    spec: &CircuitSpec,
    range: std::ops::Range<usize>,
    state: &mut BatchState,
    angles: &ChunkAngles,
) {
    for gi in range {
        let g = &spec.gates()[gi];
        match g.kind {
            GateKind::Cz => state.cz(g.targets[0], g.targets[1]),
            GateKind::X => state.x(g.targets[0]),
            GateKind::Sx => state.sx(g.targets[0], false),
            k => {
                let axis = k.rotation().expect("parameterized");
                state.rotate(axis, g.targets[0], &angles.cos[gi], &angles.sin[gi]);
            }
        }
    }
}

/// Exact or sampled per-qubit ⟨Z⟩ for a batch of feature vectors, using the
/// lane-batched simulator. `features` is sample-major (`n × e_count`); the
/// result is sample-major (`n × n_qubits`). With shots, sample `s` uses
/// seed `seed + s`.
pub fn evaluate_batch(
    spec: &CircuitSpec,
    features: &[f64],
    theta: &ParamStore,
    shots: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;

    let e = spec.e_count();
    let nq = spec.n_qubits();
    if e == 0 {
        if !features.is_empty() {
            return Err(Error::usage("circuit has no encoding gates; features must be empty"));
        }
        return evaluate(spec, &[], theta, shots, seed);
    }
    if features.len() % e != 0 {
        return Err(Error::usage(format!(
            "feature buffer length {} is not a multiple of {e}",
            features.len()
        )));
    }
    if theta.theta.len() != spec.t_count() {
        return Err(Error::usage(format!(
            "expected {} trainable angles, got {}",
            spec.t_count(),
            theta.theta.len()
        )));
    }
    let n = features.len() / e;
    let mut out = vec![0.0; n * nq];
    out.par_chunks_mut(CHUNK_LANES * nq)
        .zip(features.par_chunks(CHUNK_LANES * e))
        .enumerate()
        .try_for_each(|(chunk, (out, feats))| -> Result<()> {
            let lanes = feats.len() / e;
            let angles = ChunkAngles::new(spec, feats, &theta.theta, lanes);
            let mut state = BatchState::new(nq, lanes)?;
            apply_forward(spec, &mut state, &angles);
            let mut z = vec![0.0; lanes];
            for q in 0..nq {
                state.expectation_z(q, &mut z);
                for l in 0..lanes {
                    out[l * nq + q] = if shots == 0 {
                        z[l]
                    } else {
                        let sample = (chunk * CHUNK_LANES + l) as u64;
                        sample_expectation(z[l], shots, qubit_seed(seed.wrapping_add(sample), q))?
                    };
                }
            }
            Ok(())
        })?;
    Ok(out)
}
