//! Predicted and measured Fourier spectra of circuit outputs, and frequency
//! error maps for images.
//!
//! A Pauli-rotation encoding `exp(−iαxP/2)` contributes eigenvalues `±α/2`,
//! so a circuit whose swept variable drives gates with scales `α_g` can only
//! produce frequencies `Σ_g s_g α_g` with `s_g ∈ {−1, 0, 1}`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::circuit::{evaluate_batch, CircuitSpec, ParamRole, ParamStore};
use crate::error::{Error, Result};
use crate::imaging::Image;

/// Tolerance for merging predicted frequencies and rational detection.
const FREQ_TOL: f64 = 1e-9;
/// Coefficients below this magnitude count as unpopulated.
const POPULATED: f64 = 1e-8;
/// Largest accepted common denominator of the scaling factors.
const MAX_DENOMINATOR: u64 = 1000;

/// One-dimensional sweep `x_k = α_k·x + base_k` over the selected features.
#[derive(Debug, Clone)]
pub struct SpectrumQuery {
    pub circuit: CircuitSpec,
    /// Per-feature scale `α_k`.
    pub scaling: Vec<f64>,
    /// Feature driven by the sweep; `None` ties every feature to it.
    pub feature: Option<usize>,
    /// Values of features not driven by the sweep.
    pub base: Vec<f64>,
    /// Qubit whose ⟨Z⟩ is analysed.
    pub output: usize,
}

impl SpectrumQuery {
    /// Unit scaling, every feature swept, output qubit 0.
    pub fn new(circuit: CircuitSpec) -> Self {
        let e = circuit.e_count();
        SpectrumQuery {
            circuit,
            scaling: vec![1.0; e],
            feature: None,
            base: vec![0.0; e],
            output: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let e = self.circuit.e_count();
        if self.scaling.len() != e || self.base.len() != e {
            return Err(Error::usage(format!(
                "scaling and base need {e} entries, got {} and {}",
                self.scaling.len(),
                self.base.len()
            )));
        }
        if let Some(k) = self.feature {
            if k >= e {
                return Err(Error::usage(format!("feature {k} out of range ({e} features)")));
            }
        }
        if self.output >= self.circuit.n_qubits() {
            return Err(Error::usage(format!("output qubit {} out of range", self.output)));
        }
        if let Some(a) = self.scaling.iter().find(|a| !a.is_finite()) {
            return Err(Error::usage(format!("scaling factor {a} is not finite")));
        }
        Ok(())
    }

    fn swept(&self, k: usize) -> bool {
        self.feature.is_none_or(|f| f == k)
    }

    /// Scales of every gate driven by the swept variable.
    fn driven_scales(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for g in self.circuit.gates() {
            if let ParamRole::Encoding(k) = g.role {
                if g.kind.generator_eigenvalues() != Some([-0.5, 0.5]) {
                    return Err(Error::UnsupportedCircuit(format!(
                        "encoding gate {} is not a Pauli rotation",
                        g.kind.name()
                    )));
                }
                if self.swept(k) {
                    out.push(self.scaling[k]);
                }
            }
        }
        Ok(out)
    }

    fn features_at(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        (0..self.scaling.len()).map(move |k| {
            if self.swept(k) {
                self.scaling[k] * x + self.base[k]
            } else {
                self.base[k]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSpectrum {
    /// Sorted, deduplicated, symmetric about 0.
    pub frequencies: Vec<f64>,
    /// Encoding gates driven by the sweep (`L`).
    pub encoding_gates: usize,
    /// `2^{2L}`: eigenvalue-sum differences before deduplication.
    pub raw_combinations: f64,
}

impl PredictedSpectrum {
    pub fn contains(&self, w: f64) -> bool {
        self.frequencies.iter().any(|f| (f - w).abs() < 1e-6)
    }

    pub fn max_abs(&self) -> f64 {
        self.frequencies.last().copied().unwrap_or(0.0)
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() < FREQ_TOL);
    v
}

pub fn predict_spectrum(q: &SpectrumQuery) -> Result<PredictedSpectrum> {
    q.validate()?;
    let scales = q.driven_scales()?;
    let mut set = vec![0.0];
    for &a in &scales {
        let next: Vec<f64> = set.iter().flat_map(|&w| [w - a, w, w + a]).collect();
        set = dedup_sorted(next);
        // keep the set exactly symmetric after rounding
        for w in set.iter_mut() {
            if w.abs() < FREQ_TOL {
                *w = 0.0;
            }
        }
    }
    Ok(PredictedSpectrum {
        frequencies: set,
        encoding_gates: scales.len(),
        raw_combinations: 2f64.powi(2 * scales.len() as i32),
    })
}

/// Smallest `d ≤ 1000` making every value an integer multiple of `1/d`.
pub fn common_denominator(values: &[f64]) -> Result<u64> {
    (1..=MAX_DENOMINATOR)
        .find(|&d| {
            values
                .iter()
                .all(|v| (v * d as f64 - (v * d as f64).round()).abs() < FREQ_TOL * d as f64)
        })
        .ok_or_else(|| {
            Error::UnsupportedCircuit(format!(
                "scaling factors are not rational with denominator ≤ {MAX_DENOMINATOR}"
            ))
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub frequency: f64,
    pub coefficient: Complex64,
}

/// Coefficients `c_k` of `f(x) = Σ c_k e^{ikx/d}` from `2K+1` samples on
/// `[0, 2πd)`, ordered from `−K/d` to `K/d`.
pub fn dft_coefficients(samples: &[f64], period: u64) -> Vec<SpectralLine> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k_max = (n / 2) as i64;
    (-k_max..=k_max)
        .map(|k| {
            let idx = k.rem_euclid(n as i64) as usize;
            SpectralLine {
                frequency: k as f64 / period as f64,
                coefficient: buf[idx] / n as f64,
            }
        })
        .collect()
}

/// Samples `f` at `2·max_freq + 1` points on `[0, 2π)` and returns its
/// Fourier coefficients for integer frequencies `−max_freq..=max_freq`.
pub fn empirical_spectrum(f: impl Fn(f64) -> f64, max_freq: usize) -> Vec<SpectralLine> {
    let n = 2 * max_freq + 1;
    let samples: Vec<f64> = (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect();
    dft_coefficients(&samples, 1)
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub predicted: PredictedSpectrum,
    /// Coefficients for the first trainable assignment.
    pub coefficients: Vec<SpectralLine>,
    /// Largest off-support energy `Σ|c|²` over all assignments.
    pub max_leakage: f64,
    /// Off-support frequency with the largest coefficient, if any.
    pub worst_frequency: Option<f64>,
    /// Fraction of predicted frequencies populated in at least one assignment.
    pub diversity: f64,
    pub assignments: usize,
    pub shots: u64,
}

impl SpectrumReport {
    /// `frequency,re,im,magnitude` rows after `#`-prefixed `echo` lines.
    pub fn to_csv(&self, echo: &str) -> String {
        let mut out = String::new();
        for line in echo.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(
            out,
            "# predicted {} frequencies from {} encoding gates ({} raw combinations)",
            self.predicted.frequencies.len(),
            self.predicted.encoding_gates,
            self.predicted.raw_combinations
        );
        let _ = writeln!(
            out,
            "# max leakage {:e}, diversity {:.4}, assignments {}, shots {}",
            self.max_leakage, self.diversity, self.assignments, self.shots
        );
        out.push_str("frequency,re,im,magnitude\n");
        for l in &self.coefficients {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e}",
                l.frequency,
                l.coefficient.re,
                l.coefficient.im,
                l.coefficient.norm()
            );
        }
        out
    }
}

/// Extra DFT bins beyond the predicted band, so leakage is observable.
const GUARD_BINS: usize = 4;

/// Measures the spectrum for `assignments` random trainable vectors drawn
/// from `seed`. With `shots == 0` any off-support energy above `1e-8` is a
/// property violation; with shots the leakage is only reported.
pub fn verify_spectrum(q: &SpectrumQuery, assignments: usize, seed: u64, shots: u64) -> Result<SpectrumReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas: Vec<ParamStore> = (0..assignments.max(1)).map(|_| ParamStore::random(&q.circuit, &mut rng)).collect();
    verify_spectrum_at(q, &thetas, seed, shots)
}

/// As [`verify_spectrum`] for the given trainable vectors, for instance the
/// angles of a trained model. `seed` only drives shot sampling.
pub fn verify_spectrum_at(q: &SpectrumQuery, thetas: &[ParamStore], seed: u64, shots: u64) -> Result<SpectrumReport> {
    if thetas.is_empty() {
        return Err(Error::usage("spectrum needs at least one trainable assignment"));
    }
    let predicted = predict_spectrum(q)?;
    let period = common_denominator(&q.scaling)?;
    let k = (predicted.max_abs() * period as f64).round() as usize + GUARD_BINS;
    let n = 2 * k + 1;
    let e = q.circuit.e_count();
    let nq = q.circuit.n_qubits();
    let mut features = Vec::with_capacity(n * e);
    for i in 0..n {
        let x = TAU * period as f64 * i as f64 / n as f64;
        features.extend(q.features_at(x));
    }
    let mut populated = vec![false; predicted.frequencies.len()];
    let mut max_leakage: f64 = 0.0;
    let mut worst: Option<(f64, f64)> = None;
    let mut first = None;
    for (a, theta) in thetas.iter().enumerate() {
        let out = if e == 0 {
            let z = evaluate_batch(&q.circuit, &[], theta, shots, seed + a as u64)?;
            vec![z[q.output]; n]
        } else {
            let z = evaluate_batch(&q.circuit, &features, theta, shots, seed.wrapping_add((a * n) as u64))?;
            (0..n).map(|i| z[i * nq + q.output]).collect()
        };
        let lines = dft_coefficients(&out, period);
        let mut leakage = 0.0;
        for l in &lines {
            let mag = l.coefficient.norm();
            match predicted.frequencies.iter().position(|f| (f - l.frequency).abs() < 1e-6) {
                Some(i) => populated[i] |= mag > POPULATED,
                None => {
                    leakage += mag * mag;
                    if worst.is_none_or(|(_, m)| mag > m) {
                        worst = Some((l.frequency, mag));
                    }
                }
            }
        }
        max_leakage = max_leakage.max(leakage);
        if first.is_none() {
            first = Some(lines);
        }
    }
    let report = SpectrumReport {
        diversity: populated.iter().filter(|&&p| p).count() as f64 / populated.len() as f64,
        predicted,
        coefficients: first.unwrap_or_default(),
        max_leakage,
        worst_frequency: worst.map(|(f, _)| f),
        assignments: thetas.len(),
        shots,
    };
    if shots == 0 && report.max_leakage > POPULATED {
        return Err(Error::Property(format!(
            "energy {:e} outside the predicted spectrum, largest at frequency {}",
            report.max_leakage,
            report.worst_frequency.unwrap_or(f64::NAN)
        )));
    }
    Ok(report)
}

fn fft2_magnitude(img: &Image) -> Vec<f64> {
    let (h, w) = (img.height(), img.width());
    let mut planner = FftPlanner::new();
    let mut data: Vec<Complex64> = img.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(w);
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = data[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            data[r * w + c] = col[r];
        }
    }
    data.iter().map(|z| z.norm()).collect()
}

/// `log(1 + ||F(pred)| − |F(truth)||)` normalized to `[0, 1]`, DC at
/// `(h/2, w/2)`.
pub fn frequency_error_map(pred: &Image, truth: &Image) -> Result<Image> {
    let (h, w) = (truth.height(), truth.width());
    if pred.height() != h || pred.width() != w {
        return Err(Error::usage(format!(
            "image dimensions differ: {}x{} vs {h}x{w}",
            pred.height(),
            pred.width()
        )));
    }
    let (fp, ft) = (fft2_magnitude(pred), fft2_magnitude(truth));
    let mut map = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let d = (fp[r * w + c] - ft[r * w + c]).abs();
            let (sr, sc) = ((r + h / 2) % h, (c + w / 2) % w);
            map[sr * w + sc] = d.ln_1p();
        }
    }
    let max = map.iter().cloned().fold(0.0, f64::max);
    // FFT rounding leaves ~1e-15 noise where the spectra agree
    if max > 1e-12 {
        for v in map.iter_mut() {
            *v = if *v > 1e-12 { *v / max } else { 0.0 };
        }
    } else {
        map.fill(0.0);
    }
    Image::new(h, w, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    fn single(text: &str) -> SpectrumQuery {
        SpectrumQuery::new(parse_circuit(text).unwrap())
    }

    #[test]
    fn prediction_examples() {
        let p = predict_spectrum(&single("qubits 1\nrx 0 enc 0\n")).unwrap();
        assert_eq!(p.frequencies, vec![-1.0, 0.0, 1.0]);
        let p = predict_spectrum(&single("qubits 1\nrx 0 enc 0\nry 0 par 0\nrx 0 enc 0\nrx 0 enc 0\n")).unwrap();
        assert_eq!(p.frequencies, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(p.raw_combinations, 64.0);
        let mut q = single("qubits 1\nrx 0 enc 0\nrz 0 enc 1\n");
        q.scaling = vec![1.0, 3.0];
        let p = predict_spectrum(&q).unwrap();
        assert_eq!(p.frequencies, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn dft_examples() {
        let c = empirical_spectrum(f64::cos, 4);
        for l in &c {
            let expect = if l.frequency.abs() == 1.0 { 0.5 } else { 0.0 };
            assert!((l.coefficient - Complex64::new(expect, 0.0)).norm() < 1e-12, "{l:?}");
        }
        let c = empirical_spectrum(|_| 0.7, 3);
        for l in &c {
            let expect = if l.frequency == 0.0 { 0.7 } else { 0.0 };
            assert!((l.coefficient.re - expect).abs() < 1e-12 && l.coefficient.im.abs() < 1e-12);
        }
    }

    #[test]
    fn dft_matches_direct_sum() {
        let samples: Vec<f64> = (0..9).map(|i| ((i * 7 + 3) % 5) as f64 * 0.1).collect();
        for l in dft_coefficients(&samples, 1) {
            let direct: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(n, &v)| v * Complex64::from_polar(1.0, -TAU * l.frequency * n as f64 / 9.0))
                .sum::<Complex64>()
                / 9.0;
            assert!((direct - l.coefficient).norm() < 1e-14);
        }
    }

    #[test]
    fn sandwich_circuit_is_contained() {
        let q = single("qubits 1\nry 0 par 0\nrx 0 enc 0\nry 0 par 1\n");
        let r = verify_spectrum(&q, 10, 1, 0).unwrap();
        assert!(r.max_leakage < 1e-10);
        assert_eq!(r.predicted.frequencies.len(), 3);
    }

    #[test]
    fn rational_scaling_sweeps_longer_period() {
        let mut q = single("qubits 1\nry 0 par 0\nrx 0 enc 0\nry 0 par 1\nrx 0 enc 0\n");
        q.scaling = vec![0.5];
        assert_eq!(common_denominator(&q.scaling).unwrap(), 2);
        let r = verify_spectrum(&q, 5, 3, 0).unwrap();
        assert_eq!(r.predicted.frequencies, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(r.max_leakage < 1e-10);
    }

    #[test]
    fn conjugate_symmetry() {
        let q = single("qubits 2\nry 0 par 0\nrx 0 enc 0\ncz 0 1\nry 1 enc 0\nry 0 par 1\nrx 0 enc 0\n");
        let r = verify_spectrum(&q, 1, 8, 0).unwrap();
        let c = &r.coefficients;
        let n = c.len();
        for i in 0..n {
            assert!((c[i].coefficient - c[n - 1 - i].coefficient.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn non_rotation_scaling_rejected() {
        let mut q = single("qubits 1\nrx 0 enc 0\n");
        q.scaling = vec![std::f64::consts::SQRT_2];
        assert!(matches!(verify_spectrum(&q, 1, 0, 0), Err(Error::UnsupportedCircuit(_))));
    }

    #[test]
    fn error_map_examples() {
        let truth = crate::imaging::phantom(16).unwrap();
        let same = frequency_error_map(&truth, &truth).unwrap();
        assert!(same.pixels().iter().all(|&v| v == 0.0));
        let shifted = Image::new(16, 16, truth.pixels().iter().map(|v| v * 0.5 + 0.1).collect()).unwrap();
        let half = Image::new(16, 16, truth.pixels().iter().map(|v| v * 0.5).collect()).unwrap();
        let m = frequency_error_map(&shifted, &half).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                if (r, c) != (8, 8) {
                    assert_eq!(m.get(r, c), 0.0, "({r}, {c})");
                }
            }
        }
        assert_eq!(m.get(8, 8), 1.0);
    }
}
