//! Dense statevector simulation of the CZ / RX / RY / RZ / X / √X gate set.
//!
//! Basis index bit `q` (counting from the least significant bit) is qubit
//! `q`. Rotations follow the `exp(-iθP/2)` convention, so every
//! parameterized generator has eigenvalues ±1/2. Global phase is not
//! tracked.

mod batch;

pub use batch::{BatchState, Rotation};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Cz,
    Rx,
    Ry,
    Rz,
    X,
    Sx,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::Cz,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::X,
        GateKind::Sx,
    ];

    pub fn is_parameterized(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cz => 2,
            _ => 1,
        }
    }

    /// Eigenvalues of the rotation generator, `None` for fixed gates.
    pub fn generator_eigenvalues(self) -> Option<[f64; 2]> {
        self.is_parameterized().then_some([-0.5, 0.5])
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Cz => "cz",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::X => "x",
            GateKind::Sx => "sx",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        GateKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Rotation axis for parameterized kinds.
    pub fn rotation(self) -> Option<Rotation> {
        match self {
            GateKind::Rx => Some(Rotation::X),
            GateKind::Ry => Some(Rotation::Y),
            GateKind::Rz => Some(Rotation::Z),
            _ => None,
        }
    }

    /// Dense row-major unitary of dimension `2^arity`.
    ///
    /// For CZ the first listed qubit is the low bit of the local index.
    pub fn matrix(self, angle: f64) -> Vec<Complex64> {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let i = Complex64::i();
        match self {
            GateKind::Cz => {
                let mut m = vec![ZERO; 16];
                m[0] = ONE;
                m[5] = ONE;
                m[10] = ONE;
                m[15] = -ONE;
                m
            }
            GateKind::Rx => vec![c.into(), -i * s, -i * s, c.into()],
            GateKind::Ry => vec![c.into(), (-s).into(), s.into(), c.into()],
            GateKind::Rz => vec![
                Complex64::new(c, -s),
                ZERO,
                ZERO,
                Complex64::new(c, s),
            ],
            GateKind::X => vec![ZERO, ONE, ONE, ZERO],
            GateKind::Sx => {
                let p = Complex64::new(0.5, 0.5);
                let q = Complex64::new(0.5, -0.5);
                vec![p, q, q, p]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// The all-zeros state `|0…0⟩`.
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Statevector { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "amplitude count {n} is not 2^n with n >= 1"
            )));
        }
        let n_qubits = n.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        Ok(Statevector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, kind: GateKind, qubits: &[usize], angle: Option<f64>) -> Result<()> {
        if qubits.len() != kind.arity() {
            return Err(Error::usage(format!(
                "{} takes {} qubit(s), got {}",
                kind.name(),
                kind.arity(),
                qubits.len()
            )));
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::usage(format!(
                    "qubit {q} out of range for {}-qubit state",
                    self.n_qubits
                )));
            }
            if qubits[..i].contains(&q) {
                return Err(Error::usage(format!("duplicate qubit {q} for {}", kind.name())));
            }
        }
        let angle = match (kind.is_parameterized(), angle) {
            (true, Some(a)) => a,
            (false, None) => 0.0,
            (true, None) => {
                return Err(Error::usage(format!("{} requires an angle", kind.name())))
            }
            (false, Some(_)) => {
                return Err(Error::usage(format!("{} does not take an angle", kind.name())))
            }
        };
        match kind {
            GateKind::Cz => self.apply_cz(qubits[0], qubits[1]),
            _ => {
                let m = kind.matrix(angle);
                self.apply_1q([m[0], m[1], m[2], m[3]], qubits[0]);
            }
        }
        Ok(())
    }

    fn apply_1q(&mut self, m: [Complex64; 4], q: usize) {
        let bit = 1usize << q;
        for hi in (0..self.amps.len()).step_by(bit << 1) {
            for i0 in hi..hi + bit {
                let i1 = i0 | bit;
                let (a, b) = (self.amps[i0], self.amps[i1]);
                self.amps[i0] = m[0] * a + m[1] * b;
                self.amps[i1] = m[2] * a + m[3] * b;
            }
        }
    }

    fn apply_cz(&mut self, q1: usize, q2: usize) {
        let mask = (1usize << q1) | (1usize << q2);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
    }

    /// ⟨Z_q⟩ = Σ_i (±1)|a_i|², `+` where bit `q` of `i` is clear, clamped
    /// against rounding past ±1.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::usage(format!(
                "qubit {qubit} out of range for {}-qubit state",
                self.n_qubits
            )));
        }
        let bit = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum::<f64>()
            .clamp(-1.0, 1.0))
    }

    /// Shot-sampled estimate of ⟨Z_q⟩.
    pub fn sample_z(&self, qubit: usize, shots: u64, seed: u64) -> Result<f64> {
        let exact = self.expectation_z(qubit)?;
        sample_expectation(exact, shots, seed)
    }
}

pub fn init_state(n_qubits: usize) -> Result<Statevector> {
    Statevector::new(n_qubits)
}

pub(crate) fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Config(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Draws `shots` single-qubit Z measurements of a qubit with exact
/// expectation `exact` and returns the empirical mean of the ±1 outcomes.
///
/// The number of `-1` outcomes is a binomial draw with success probability
/// `(1 - exact) / 2`, which is distributionally identical to summing
/// independent Bernoulli shots.
pub fn sample_expectation(exact: f64, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::usage("shot count must be at least 1"));
    }
    let p = ((1.0 - exact) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flips = Binomial::new(shots, p)
        .map_err(|e| Error::Numerical(format!("binomial({shots}, {p}): {e}")))?
        .sample(&mut rng);
    Ok(1.0 - 2.0 * flips as f64 / shots as f64)
}

/// Per-qubit seed stream derived from a base seed.
pub(crate) fn qubit_seed(seed: u64, qubit: usize) -> u64 {
    seed ^ (qubit as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
