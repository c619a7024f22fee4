//! QFGN and the classical coordinate-network baselines.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{generate_default_circuit, CircuitSpec, ParamStore};
use crate::error::{Error, Result};
use crate::fgfs::{FgfsConfig, FgfsLayer};
use crate::grad::GradientVector;
use crate::nn::{
    Activation, ActivationKind, BatchNorm, Layer, Linear, Matrix, Mode, Network, Param, RandomFourier,
};
use crate::qlayer::{GradientMethod, QuantumLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Qfgn,
    Relu,
    Tanh,
    RffRelu,
    Siren,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Qfgn,
        ModelKind::Relu,
        ModelKind::Tanh,
        ModelKind::RffRelu,
        ModelKind::Siren,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Qfgn => "qfgn",
            ModelKind::Relu => "relu",
            ModelKind::Tanh => "tanh",
            ModelKind::RffRelu => "rff-relu",
            ModelKind::Siren => "siren",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown model kind '{s}' (expected qfgn, relu, tanh, rff-relu or siren)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub width: usize,
    pub hidden_layers: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            width: 10,
            hidden_layers: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RffConfig {
    pub frequencies: usize,
    pub sigma: f64,
    pub alpha: f64,
}

impl Default for RffConfig {
    fn default() -> Self {
        RffConfig {
            frequencies: 5,
            sigma: 10.0,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SirenConfig {
    pub omega0: f64,
}

impl Default for SirenConfig {
    fn default() -> Self {
        SirenConfig { omega0: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumConfig {
    pub gradient: GradientMethod,
    /// Inference shots; 0 is exact.
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub mlp: MlpConfig,
    pub rff: RffConfig,
    pub siren: SirenConfig,
    pub fgfs: FgfsConfig,
    pub quantum: QuantumConfig,
}

const D_IN: usize = 2;

#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub seed: u64,
    pub config: ModelConfig,
    pub circuit: Arc<CircuitSpec>,
    pub net: Network,
}

/// Default architecture for `kind`, initialized from `seed`.
pub fn build_model(kind: ModelKind, seed: u64) -> Model {
    build_model_with(kind, &ModelConfig::default(), Arc::new(generate_default_circuit()), seed)
        .expect("default model configuration is valid")
}

pub fn build_model_with(kind: ModelKind, config: &ModelConfig, circuit: Arc<CircuitSpec>, seed: u64) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = config.mlp.width;
    let hidden = config.mlp.hidden_layers;
    if width == 0 {
        return Err(Error::Config("mlp width must be at least 1".into()));
    }
    let mut layers = Vec::new();
    let bn_block = |layers: &mut Vec<Layer>, i: usize, d_in: usize, act: ActivationKind, rng: &mut ChaCha8Rng| {
        layers.push(Layer::Linear(Linear::init_default(&format!("l{i}"), d_in, width, rng)));
        layers.push(Layer::BatchNorm(BatchNorm::new(&format!("bn{i}"), width)));
        layers.push(Layer::Activation(Activation::new(act)));
    };
    match kind {
        ModelKind::Relu | ModelKind::Tanh => {
            let act = if kind == ModelKind::Relu {
                ActivationKind::Relu
            } else {
                ActivationKind::Tanh
            };
            bn_block(&mut layers, 0, D_IN, act, &mut rng);
            for i in 1..=hidden {
                bn_block(&mut layers, i, width, act, &mut rng);
            }
            layers.push(Layer::Linear(Linear::init_default("out", width, 1, &mut rng)));
        }
        ModelKind::RffRelu => {
            let m = config.rff.frequencies;
            if 2 * m != width {
                return Err(Error::Config(format!(
                    "rff-relu needs 2 * rff.frequencies = mlp.width, got {m} frequencies for width {width}"
                )));
            }
            let normal = Normal::new(0.0, config.rff.sigma).map_err(|e| Error::Config(format!("rff sigma: {e}")))?;
            let freqs = (0..m * D_IN).map(|_| normal.sample(&mut rng)).collect();
            layers.push(Layer::RandomFourier(RandomFourier::new("rff", freqs, m, D_IN, config.rff.alpha)));
            for i in 1..=hidden {
                bn_block(&mut layers, i, width, ActivationKind::Relu, &mut rng);
            }
            layers.push(Layer::Linear(Linear::init_default("out", width, 1, &mut rng)));
        }
        ModelKind::Siren => {
            let w0 = config.siren.omega0;
            let sine = ActivationKind::Sine(w0);
            let bias0 = 1.0 / (D_IN as f64).sqrt();
            layers.push(Layer::Linear(Linear::init_uniform("l0", D_IN, width, 1.0 / D_IN as f64, bias0, &mut rng)));
            layers.push(Layer::Activation(Activation::new(sine)));
            let deep = (6.0 / width as f64).sqrt() / w0;
            let bias = 1.0 / (width as f64).sqrt();
            for i in 1..=hidden {
                layers.push(Layer::Linear(Linear::init_uniform(&format!("l{i}"), width, width, deep, bias, &mut rng)));
                layers.push(Layer::Activation(Activation::new(sine)));
            }
            layers.push(Layer::Linear(Linear::init_uniform("out", width, 1, deep, bias, &mut rng)));
        }
        ModelKind::Qfgn => {
            if config.fgfs.basis.d_in != D_IN {
                return Err(Error::Config(format!("fgfs d_in must be {D_IN} for image coordinates")));
            }
            if config.fgfs.d_out != circuit.e_count() {
                return Err(Error::Config(format!(
                    "fgfs d_out ({}) must equal the circuit's encoding count ({})",
                    config.fgfs.d_out,
                    circuit.e_count()
                )));
            }
            let fgfs = FgfsLayer::new(config.fgfs.clone(), &mut rng)?;
            let theta = ParamStore::random(&circuit, &mut rng);
            let mut q = QuantumLayer::new(circuit.clone(), theta)?;
            q.method = config.quantum.gradient;
            q.shots = config.quantum.shots;
            q.shot_seed = seed;
            let nq = circuit.n_qubits();
            layers.push(Layer::Fgfs(Box::new(fgfs)));
            layers.push(Layer::Quantum(Box::new(q)));
            layers.push(Layer::Linear(Linear::init_default("out", nq, 1, &mut rng)));
        }
    }
    Ok(Model {
        kind,
        seed,
        config: config.clone(),
        circuit,
        net: Network::new(layers),
    })
}

impl Model {
    fn check_coords(coords: &Matrix) -> Result<()> {
        if coords.cols() != D_IN {
            return Err(Error::usage(format!("coordinates must have {D_IN} columns, got {}", coords.cols())));
        }
        if coords.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("coordinates must be finite"));
        }
        Ok(())
    }

    /// One prediction per coordinate row.
    pub fn forward(&mut self, coords: &Matrix, mode: Mode) -> Result<Vec<f64>> {
        Model::check_coords(coords)?;
        Ok(self.net.forward(coords, mode)?.into_vec())
    }

    pub fn infer(&self, coords: &Matrix) -> Result<Vec<f64>> {
        Model::check_coords(coords)?;
        Ok(self.net.infer(coords)?.into_vec())
    }

    /// Gradient of `Σ upstream[s]·prediction[s]` after a training forward.
    pub fn backward(&mut self, upstream: &[f64]) -> Result<GradientVector> {
        let dy = Matrix::from_vec(upstream.len(), 1, upstream.to_vec())?;
        self.net.backward(&dy)
    }

    pub fn trainable_count(&self) -> usize {
        self.net.trainable_count()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }

    /// Names and ranges of each trainable tensor within the flat vector.
    pub fn trainable_slices(&self) -> Vec<(String, Range<usize>)> {
        let mut off = 0;
        self.params()
            .into_iter()
            .filter(|p| p.is_trainable())
            .map(|p| {
                let r = off..off + p.value.len();
                off = r.end;
                (p.name.clone(), r)
            })
            .collect()
    }

    pub fn trainable_values(&self) -> Vec<f64> {
        self.params()
            .into_iter()
            .filter(|p| p.is_trainable())
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    pub fn set_trainable_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.trainable_count() {
            return Err(Error::usage(format!(
                "expected {} trainable values, got {}",
                self.trainable_count(),
                values.len()
            )));
        }
        let mut off = 0;
        for p in self.params_mut().into_iter().filter(|p| p.is_trainable()) {
            let n = p.value.len();
            p.value.copy_from_slice(&values[off..off + n]);
            off += n;
        }
        self.refresh();
        Ok(())
    }

    /// Re-derives cached quantities after parameters were overwritten.
    pub fn refresh(&mut self) {
        for layer in &mut self.net.layers {
            layer.refresh();
        }
    }
}

/// Rewrites `α[cos(2πBx); sin(2πBx)]` followed by `linear` as
/// `W' sin(2π[B; B]x + φ) + b` with `φ = [π/2, …, 0, …]` and `W' = αW`,
/// using `cos t = sin(t + π/2)`. The result is a network of one linear
/// layer, a unit-frequency sine, and the output linear layer.
pub fn rff_to_siren(rff: &RandomFourier, linear: &Linear) -> Result<Network> {
    let (m, d) = (rff.m(), rff.d_in());
    if linear.d_in() != 2 * m {
        return Err(Error::usage(format!(
            "linear layer takes {} inputs, random features produce {}",
            linear.d_in(),
            2 * m
        )));
    }
    let mut first = Linear::new("siren.l0", d, 2 * m);
    for half in 0..2 {
        for k in 0..m {
            let row = half * m + k;
            for i in 0..d {
                first.weight.value[row * d + i] = TAU * rff.freqs.value[k * d + i];
            }
            first.bias.value[row] = if half == 0 { FRAC_PI_2 } else { 0.0 };
        }
    }
    let mut out = Linear::new("siren.out", 2 * m, linear.d_out());
    out.weight.value = linear.weight.value.iter().map(|w| rff.alpha * w).collect();
    out.bias.value = linear.bias.value.clone();
    Ok(Network::new(vec![
        Layer::Linear(first),
        Layer::Activation(Activation::new(ActivationKind::Sine(1.0))),
        Layer::Linear(out),
    ]))
}
