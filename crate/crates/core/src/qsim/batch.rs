//! Lane-batched statevectors.
//!
//! A `BatchState` holds `lanes` independent registers of the same width, with
//! amplitude-major storage (`index = amp * lanes + lane`) and split real and
//! imaginary planes. Every gate touches the same amplitude pairs in every
//! lane, so the inner loops run over contiguous lane slices. This is the
//! simulator used on the training path; `Statevector` is the reference.

use num_complex::Complex64;

use super::check_qubit_count;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone)]
pub struct BatchState {
    n_qubits: usize,
    lanes: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl BatchState {
    /// `lanes` copies of `|0…0⟩`.
    pub fn new(n_qubits: usize, lanes: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let len = (1usize << n_qubits) * lanes.max(1);
        let mut s = BatchState {
            n_qubits,
            lanes: lanes.max(1),
            re: vec![0.0; len],
            im: vec![0.0; len],
        };
        s.reset();
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn reset(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
        self.re[..self.lanes].fill(1.0);
    }

    pub fn copy_from(&mut self, other: &BatchState) {
        debug_assert_eq!(self.re.len(), other.re.len());
        self.re.copy_from_slice(&other.re);
        self.im.copy_from_slice(&other.im);
    }

    /// `lanes` copies of lane 0 of `single`.
    pub fn broadcast(single: &BatchState, lanes: usize) -> BatchState {
        let dim = 1usize << single.n_qubits;
        let lanes = lanes.max(1);
        let mut re = Vec::with_capacity(dim * lanes);
        let mut im = Vec::with_capacity(dim * lanes);
        for i in 0..dim {
            let k = i * single.lanes;
            re.extend(std::iter::repeat_n(single.re[k], lanes));
            im.extend(std::iter::repeat_n(single.im[k], lanes));
        }
        BatchState {
            n_qubits: single.n_qubits,
            lanes,
            re,
            im,
        }
    }

    /// Adds the sum over lanes of `self` into the single-lane `acc`.
    pub fn add_lane_sum_into(&self, acc: &mut BatchState) {
        debug_assert_eq!(acc.lanes, 1);
        for i in 0..1usize << self.n_qubits {
            let r = i * self.lanes..(i + 1) * self.lanes;
            acc.re[i] += self.re[r.clone()].iter().sum::<f64>();
            acc.im[i] += self.im[r].iter().sum::<f64>();
        }
    }

    pub fn zero(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
    }

    pub fn lane_amplitudes(&self, lane: usize) -> Vec<Complex64> {
        (0..1usize << self.n_qubits)
            .map(|i| {
                let k = i * self.lanes + lane;
                Complex64::new(self.re[k], self.im[k])
            })
            .collect()
    }

    pub fn lane_norm_sqr(&self, lane: usize) -> f64 {
        (0..1usize << self.n_qubits)
            .map(|i| {
                let k = i * self.lanes + lane;
                self.re[k] * self.re[k] + self.im[k] * self.im[k]
            })
            .sum()
    }

    /// Applies `exp(-iθP/2)` on qubit `q` with per-lane `cos(θ/2)` and
    /// `sin(θ/2)`. Negating `sin` applies the inverse.
    pub fn rotate(&mut self, axis: Rotation, q: usize, cos: &[f64], sin: &[f64]) {
        debug_assert!(cos.len() == self.lanes && sin.len() == self.lanes);
        let lanes = self.lanes;
        match axis {
            Rotation::X => for_pairs(&mut self.re, &mut self.im, lanes, q, |ar, ai, br, bi| {
                let n = ar.len();
                let (ai, br, bi, cos, sin) = (&mut ai[..n], &mut br[..n], &mut bi[..n], &cos[..n], &sin[..n]);
                for l in 0..n {
                    let (c, s) = (cos[l], sin[l]);
                    let (xr, xi, yr, yi) = (ar[l], ai[l], br[l], bi[l]);
                    ar[l] = c * xr + s * yi;
                    ai[l] = c * xi - s * yr;
                    br[l] = s * xi + c * yr;
                    bi[l] = c * yi - s * xr;
                }
            }),
            Rotation::Y => for_pairs(&mut self.re, &mut self.im, lanes, q, |ar, ai, br, bi| {
                let n = ar.len();
                let (ai, br, bi, cos, sin) = (&mut ai[..n], &mut br[..n], &mut bi[..n], &cos[..n], &sin[..n]);
                for l in 0..n {
                    let (c, s) = (cos[l], sin[l]);
                    let (xr, xi, yr, yi) = (ar[l], ai[l], br[l], bi[l]);
                    ar[l] = c * xr - s * yr;
                    ai[l] = c * xi - s * yi;
                    br[l] = s * xr + c * yr;
                    bi[l] = s * xi + c * yi;
                }
            }),
            Rotation::Z => for_pairs(&mut self.re, &mut self.im, lanes, q, |ar, ai, br, bi| {
                let n = ar.len();
                let (ai, br, bi, cos, sin) = (&mut ai[..n], &mut br[..n], &mut bi[..n], &cos[..n], &sin[..n]);
                for l in 0..n {
                    let (c, s) = (cos[l], sin[l]);
                    let (xr, xi, yr, yi) = (ar[l], ai[l], br[l], bi[l]);
                    ar[l] = c * xr + s * xi;
                    ai[l] = c * xi - s * xr;
                    br[l] = c * yr - s * yi;
                    bi[l] = c * yi + s * yr;
                }
            }),
        }
    }

    pub fn x(&mut self, q: usize) {
        let lanes = self.lanes;
        for_pairs(&mut self.re, &mut self.im, lanes, q, |ar, ai, br, bi| {
            ar.swap_with_slice(br);
            ai.swap_with_slice(bi);
        });
    }

    /// √X, or its adjoint when `adjoint` is set.
    pub fn sx(&mut self, q: usize, adjoint: bool) {
        let lanes = self.lanes;
        // (1±i)/2 on the diagonal, (1∓i)/2 off it.
        let sign = if adjoint { -1.0 } else { 1.0 };
        for_pairs(&mut self.re, &mut self.im, lanes, q, |ar, ai, br, bi| {
            for l in 0..ar.len() {
                let (xr, xi, yr, yi) = (ar[l], ai[l], br[l], bi[l]);
                // p·x + q·y with p = (1 + sign·i)/2, q = (1 - sign·i)/2
                ar[l] = 0.5 * (xr - sign * xi + yr + sign * yi);
                ai[l] = 0.5 * (xi + sign * xr + yi - sign * yr);
                br[l] = 0.5 * (xr + sign * xi + yr - sign * yi);
                bi[l] = 0.5 * (xi - sign * xr + yi + sign * yr);
            }
        });
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        let lanes = self.lanes;
        for i in 0..1usize << self.n_qubits {
            if i & mask == mask {
                let r = i * lanes..(i + 1) * lanes;
                self.re[r.clone()].iter_mut().for_each(|v| *v = -*v);
                self.im[r].iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    /// Writes ⟨Z_q⟩ of every lane into `out`.
    pub fn expectation_z(&self, q: usize, out: &mut [f64]) {
        out.fill(0.0);
        let bit = 1usize << q;
        let lanes = self.lanes;
        for i in 0..1usize << self.n_qubits {
            let sign = if i & bit == 0 { 1.0 } else { -1.0 };
            let re = &self.re[i * lanes..(i + 1) * lanes];
            let im = &self.im[i * lanes..(i + 1) * lanes];
            for l in 0..lanes {
                out[l] += sign * (re[l] * re[l] + im[l] * im[l]);
            }
        }
        for v in out.iter_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    /// Sets `self = O ψ` lane by lane for the diagonal observable
    /// `O = Σ_q w[lane, q] Z_q`; `weights` is lane-major with `n_qubits`
    /// entries per lane.
    pub fn set_weighted_z(&mut self, psi: &BatchState, weights: &[f64]) {
        let (n, lanes) = (self.n_qubits, self.lanes);
        debug_assert_eq!(weights.len(), lanes * n);
        let mut diag = vec![0.0; lanes];
        for i in 0..1usize << n {
            for (l, d) in diag.iter_mut().enumerate() {
                let w = &weights[l * n..(l + 1) * n];
                *d = (0..n)
                    .map(|q| if i >> q & 1 == 0 { w[q] } else { -w[q] })
                    .sum();
            }
            let r = i * lanes..(i + 1) * lanes;
            for (k, d) in r.zip(&diag) {
                self.re[k] = d * psi.re[k];
                self.im[k] = d * psi.im[k];
            }
        }
    }

    /// Adds `Im⟨self|P_q ψ⟩` per lane into `out`, with `P` the Pauli
    /// matching `axis`.
    pub fn generator_overlap(&self, psi: &BatchState, axis: Rotation, q: usize, out: &mut [f64]) {
        let lanes = self.lanes;
        let half = (1usize << q) * lanes;
        let blocks = self
            .re
            .chunks_exact(2 * half)
            .zip(self.im.chunks_exact(2 * half))
            .zip(psi.re.chunks_exact(2 * half).zip(psi.im.chunks_exact(2 * half)));
        for ((lr, li), (pr, pi)) in blocks {
            let (lr0, lr1) = lr.split_at(half);
            let (li0, li1) = li.split_at(half);
            let (pr0, pr1) = pr.split_at(half);
            let (pi0, pi1) = pi.split_at(half);
            for off in (0..half).step_by(lanes) {
                let r = off..off + lanes;
                let (a_r, a_i, b_r, b_i) = (&lr0[r.clone()], &li0[r.clone()], &lr1[r.clone()], &li1[r.clone()]);
                let (x_r, x_i, y_r, y_i) = (&pr0[r.clone()], &pi0[r.clone()], &pr1[r.clone()], &pi1[r]);
                match axis {
                    Rotation::Z => {
                        for l in 0..lanes {
                            out[l] += (a_r[l] * x_i[l] - a_i[l] * x_r[l]) - (b_r[l] * y_i[l] - b_i[l] * y_r[l]);
                        }
                    }
                    Rotation::X => {
                        for l in 0..lanes {
                            out[l] += (a_r[l] * y_i[l] - a_i[l] * y_r[l]) + (b_r[l] * x_i[l] - b_i[l] * x_r[l]);
                        }
                    }
                    Rotation::Y => {
                        for l in 0..lanes {
                            out[l] += (b_r[l] * x_r[l] + b_i[l] * x_i[l]) - (a_r[l] * y_r[l] + a_i[l] * y_i[l]);
                        }
                    }
                }
            }
        }
    }
}

/// Calls `f` on every pair of lane blocks `(i, i | 1<<q)` with bit `q` of
/// `i` clear, passing `(a_re, a_im, b_re, b_im)`.
fn for_pairs(
    re: &mut [f64],
    im: &mut [f64],
    lanes: usize,
    q: usize,
    mut f: impl FnMut(&mut [f64], &mut [f64], &mut [f64], &mut [f64]),
) {
    let half = (1usize << q) * lanes;
    for (re_blk, im_blk) in re.chunks_exact_mut(half * 2).zip(im.chunks_exact_mut(half * 2)) {
        let (re_lo, re_hi) = re_blk.split_at_mut(half);
        let (im_lo, im_hi) = im_blk.split_at_mut(half);
        for (((ar, br), ai), bi) in re_lo
            .chunks_exact_mut(lanes)
            .zip(re_hi.chunks_exact_mut(lanes))
            .zip(im_lo.chunks_exact_mut(lanes))
            .zip(im_hi.chunks_exact_mut(lanes))
        {
            f(ar, ai, br, bi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{GateKind, Statevector};

    fn random_state(n: usize, seed: u64) -> Vec<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    }

    fn load(n: usize, lanes: &[Vec<Complex64>]) -> BatchState {
        let mut b = BatchState::new(n, lanes.len()).unwrap();
        for (l, amps) in lanes.iter().enumerate() {
            for (i, a) in amps.iter().enumerate() {
                b.re[i * lanes.len() + l] = a.re;
                b.im[i * lanes.len() + l] = a.im;
            }
        }
        b
    }

    #[test]
    fn batched_gates_match_reference() {
        let n = 3;
        let states: Vec<_> = (0..4).map(|s| random_state(n, s)).collect();
        let angles = [0.3, -1.1, 2.5, 0.9];
        let cos: Vec<f64> = angles.iter().map(|a: &f64| (a / 2.0).cos()).collect();
        let sin: Vec<f64> = angles.iter().map(|a: &f64| (a / 2.0).sin()).collect();
        for q in 0..n {
            for kind in GateKind::ALL {
                let mut batch = load(n, &states);
                match kind {
                    GateKind::Cz => batch.cz(q, (q + 1) % n),
                    GateKind::X => batch.x(q),
                    GateKind::Sx => batch.sx(q, false),
                    k => batch.rotate(k.rotation().unwrap(), q, &cos, &sin),
                }
                for (l, amps) in states.iter().enumerate() {
                    let mut sv = Statevector::from_amplitudes(amps.clone()).unwrap();
                    let qubits = if kind == GateKind::Cz { vec![q, (q + 1) % n] } else { vec![q] };
                    let angle = kind.is_parameterized().then_some(angles[l]);
                    sv.apply_gate(kind, &qubits, angle).unwrap();
                    for (a, b) in batch.lane_amplitudes(l).iter().zip(sv.amplitudes()) {
                        assert!((a - b).norm() < 1e-14, "{kind:?} q{q} lane {l}");
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_operations_restore_state() {
        let n = 2;
        let states: Vec<_> = (0..3).map(|s| random_state(n, 10 + s)).collect();
        let mut b = load(n, &states);
        let orig = b.clone();
        let cos = vec![0.8f64.cos(); 3];
        let sin = vec![0.8f64.sin(); 3];
        let neg: Vec<f64> = sin.iter().map(|s| -s).collect();
        b.rotate(Rotation::Y, 1, &cos, &sin);
        b.sx(0, false);
        b.sx(0, true);
        b.rotate(Rotation::Y, 1, &cos, &neg);
        for (x, y) in b.re.iter().zip(&orig.re).chain(b.im.iter().zip(&orig.im)) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
