//! Fourier-Gaussian feature scaling front-end.
//!
//! `h1 = ΛB·repeat(x, n) + b`, `h2 = h1·exp(−γh1²)`, then a trainable
//! linear map and (optionally) batch normalization. `B` and `Λ` are fixed at
//! construction; `b` is the only trainable parameter before the linear map.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Linear, Matrix, Param, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    /// `φ_p = p` radians for `p = 1..P`.
    #[default]
    Integer,
    /// `φ_p = 2π(p−1)/P`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub frequencies: usize,
    pub phases: usize,
    pub repeats: usize,
    pub d_in: usize,
    pub phase_mode: PhaseMode,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            frequencies: 8,
            phases: 4,
            repeats: 8,
            d_in: 2,
            phase_mode: PhaseMode::Integer,
        }
    }
}

/// Upper bound on the basis and projection sizes.
pub const MAX_BASIS_ENTRIES: usize = 1 << 22;

impl BasisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies == 0 || self.phases == 0 || self.repeats == 0 || self.d_in == 0 {
            return Err(Error::Config(
                "fgfs basis: frequencies, phases, repeats and d_in must all be at least 1".into(),
            ));
        }
        let entries = self
            .rows()
            .checked_mul(self.repeats)
            .and_then(|r| r.checked_mul(self.d_in));
        if entries.is_none_or(|n| n > MAX_BASIS_ENTRIES) {
            return Err(Error::Config(format!("fgfs basis larger than {MAX_BASIS_ENTRIES} entries")));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.frequencies * self.phases
    }

    pub fn cols(&self) -> usize {
        self.repeats * self.d_in
    }

    /// Uniform grid on `[−2π, 2π]` including both endpoints.
    pub fn samples(&self) -> Vec<f64> {
        let n = self.cols();
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|j| -2.0 * PI + 2.0 * TAU * j as f64 / (n - 1) as f64).collect()
    }

    pub fn phase(&self, p: usize) -> f64 {
        match self.phase_mode {
            PhaseMode::Integer => p as f64,
            PhaseMode::Uniform => TAU * (p - 1) as f64 / self.phases as f64,
        }
    }
}

/// `B[k, j] = cos(w_f s_j + φ_p)` with `k = (f−1)P + (p−1)` and `w_f = f`.
pub fn build_basis(cfg: &BasisConfig) -> Result<Matrix> {
    cfg.validate()?;
    let s = cfg.samples();
    let mut data = Vec::with_capacity(cfg.rows() * cfg.cols());
    for f in 1..=cfg.frequencies {
        for p in 1..=cfg.phases {
            let phi = cfg.phase(p);
            data.extend(s.iter().map(|&sj| (f as f64 * sj + phi).cos()));
        }
    }
    Matrix::from_vec(cfg.rows(), cfg.cols(), data)
}

pub fn gaussian_gate(h1: f64, gamma: f64) -> f64 {
    h1 * (-gamma * h1 * h1).exp()
}

pub fn gaussian_gate_derivative(h1: f64, gamma: f64) -> f64 {
    (1.0 - 2.0 * gamma * h1 * h1) * (-gamma * h1 * h1).exp()
}

/// `max |h·exp(−γh²)| = 1/√(2eγ)`, reached at `|h| = 1/√(2γ)`.
pub fn amplitude_bound(gamma: f64) -> f64 {
    1.0 / (2.0 * std::f64::consts::E * gamma).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FgfsConfig {
    pub basis: BasisConfig,
    pub d_out: usize,
    pub gamma: f64,
    pub batch_norm: bool,
}

impl Default for FgfsConfig {
    fn default() -> Self {
        FgfsConfig {
            basis: BasisConfig::default(),
            d_out: 16,
            gamma: 0.8,
            batch_norm: true,
        }
    }
}

impl FgfsConfig {
    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if self.d_out == 0 {
            return Err(Error::Config("fgfs d_out must be at least 1".into()));
        }
        if self.d_out.checked_mul(self.basis.rows()).is_none_or(|n| n > MAX_BASIS_ENTRIES) {
            return Err(Error::Config(format!("fgfs projection larger than {MAX_BASIS_ENTRIES} entries")));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("fgfs gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FgfsLayer {
    pub config: FgfsConfig,
    pub basis: Param,
    pub lambda: Param,
    pub bias: Param,
    pub linear: Linear,
    pub batch_norm: Option<BatchNorm>,
    /// `ΛB` folded over the repetitions: `d_out × d_in`.
    projection: Vec<f64>,
    h1: Option<Matrix>,
}

impl FgfsLayer {
    /// Draws `Λ ~ N(0, 1/(F·P))` and the linear map from `rng`; `b` starts at 0.
    pub fn new(config: FgfsConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let basis = build_basis(&config.basis)?;
        let rows = config.basis.rows();
        let normal = Normal::new(0.0, 1.0 / (rows as f64).sqrt()).map_err(|e| Error::Config(e.to_string()))?;
        let lambda: Vec<f64> = (0..config.d_out * rows).map(|_| normal.sample(rng)).collect();
        let linear = Linear::init_default("fgfs.linear", config.d_out, config.d_out, rng);
        let mut layer = FgfsLayer {
            basis: Param::new("fgfs.basis", vec![rows, config.basis.cols()], basis.into_vec(), ParamKind::Fixed),
            lambda: Param::new("fgfs.lambda", vec![config.d_out, rows], lambda, ParamKind::Fixed),
            bias: Param::zeros("fgfs.bias", vec![config.d_out], ParamKind::Trainable),
            linear,
            batch_norm: config.batch_norm.then(|| BatchNorm::new("fgfs.bn", config.d_out)),
            projection: Vec::new(),
            h1: None,
            config,
        };
        layer.refresh_projection();
        Ok(layer)
    }

    /// Recomputes the folded projection from `Λ` and `B`.
    pub fn refresh_projection(&mut self) {
        let d_in = self.config.basis.d_in;
        let cols = self.config.basis.cols();
        let rows = self.config.basis.rows();
        let d_out = self.config.d_out;
        let mut proj = vec![0.0; d_out * d_in];
        for o in 0..d_out {
            for k in 0..rows {
                let l = self.lambda.value[o * rows + k];
                for j in 0..cols {
                    proj[o * d_in + j % d_in] += l * self.basis.value[k * cols + j];
                }
            }
        }
        self.projection = proj;
    }

    pub fn d_in(&self) -> usize {
        self.config.basis.d_in
    }

    pub fn d_out(&self) -> usize {
        self.config.d_out
    }

    pub fn pre_gate(&self, x: &Matrix) -> Result<Matrix> {
        let (d_in, d_out) = (self.d_in(), self.d_out());
        if x.cols() != d_in {
            return Err(Error::usage(format!("fgfs expects {d_in} input columns, got {}", x.cols())));
        }
        let mut h1 = Matrix::zeros(x.rows(), d_out);
        for r in 0..x.rows() {
            let xr = x.row(r);
            for o in 0..d_out {
                let p = &self.projection[o * d_in..(o + 1) * d_in];
                h1.data_mut()[r * d_out + o] = self.bias.value[o] + p.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(h1)
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let gamma = self.config.gamma;
        let h2 = self.pre_gate(x)?.map(|h| gaussian_gate(h, gamma));
        let y = self.linear.infer(&h2)?;
        match &self.batch_norm {
            Some(bn) => bn.infer(&y),
            None => Ok(y),
        }
    }

    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        let gamma = self.config.gamma;
        let h1 = self.pre_gate(x)?;
        let h2 = h1.map(|h| gaussian_gate(h, gamma));
        let y = self.linear.forward_train(&h2)?;
        self.h1 = Some(h1);
        match &mut self.batch_norm {
            Some(bn) => bn.forward_train(&y),
            None => Ok(y),
        }
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let h1 = self.h1.as_ref().ok_or_else(|| Error::usage("fgfs: backward called before a training forward pass"))?;
        let dy = match &mut self.batch_norm {
            Some(bn) => bn.backward(dy)?,
            None => dy.clone(),
        };
        let dh2 = self.linear.backward(&dy)?;
        let gamma = self.config.gamma;
        let (d_in, d_out) = (self.d_in(), self.d_out());
        self.bias.grad.fill(0.0);
        let mut dx = Matrix::zeros(h1.rows(), d_in);
        for r in 0..h1.rows() {
            for o in 0..d_out {
                let g = dh2.get(r, o) * gaussian_gate_derivative(h1.get(r, o), gamma);
                self.bias.grad[o] += g;
                for i in 0..d_in {
                    dx.data_mut()[r * d_in + i] += g * self.projection[o * d_in + i];
                }
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.basis, &self.lambda, &self.bias];
        v.extend(self.linear.params());
        if let Some(bn) = &self.batch_norm {
            v.extend(bn.params());
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.basis, &mut self.lambda, &mut self.bias];
        v.extend(self.linear.params_mut());
        if let Some(bn) = &mut self.batch_norm {
            v.extend(bn.params_mut());
        }
        v
    }
}
