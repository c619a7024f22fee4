//! Minimal layer graph with hand-written reverse-mode derivatives.
//!
//! Batches are sample-major [`Matrix`] values. `forward_train` records what
//! each layer's local derivative needs; `backward` consumes that record and
//! overwrites the layer's parameter gradients. `infer` is pure.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fgfs::FgfsLayer;
use crate::grad::GradientVector;
use crate::qlayer::QuantumLayer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Row-major dense matrix; rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::usage(format!(
                "{} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[[f64; 2]]) -> Self {
        Matrix {
            rows: rows.len(),
            cols: 2,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn expect_cols(&self, cols: usize, what: &str) -> Result<()> {
        if self.cols != cols {
            return Err(Error::usage(format!(
                "{what} expects {cols} input columns, got {}",
                self.cols
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Constant after construction.
    Fixed,
    /// Running statistics.
    Buffer,
}

/// Named tensor owned by a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub kind: ParamKind,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, value: Vec<f64>, kind: ParamKind) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let grad = vec![0.0; value.len()];
        Param {
            name: name.into(),
            shape,
            value,
            grad,
            kind,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>, kind: ParamKind) -> Self {
        let n = shape.iter().product();
        Param::new(name, shape, vec![0.0; n], kind)
    }

    pub fn uniform(name: impl Into<String>, shape: Vec<usize>, bound: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let value = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        Param::new(name, shape, value, ParamKind::Trainable)
    }

    pub fn is_trainable(&self) -> bool {
        self.kind == ParamKind::Trainable
    }
}

fn missing_forward(layer: &str) -> Error {
    Error::usage(format!("{layer}: backward called before a training forward pass"))
}

/// Affine map `y = x Wᵀ + b` with `W` of shape `out × in`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Matrix>,
}

impl Linear {
    pub fn new(prefix: &str, d_in: usize, d_out: usize) -> Self {
        Linear {
            weight: Param::zeros(format!("{prefix}.weight"), vec![d_out, d_in], ParamKind::Trainable),
            bias: Param::zeros(format!("{prefix}.bias"), vec![d_out], ParamKind::Trainable),
            input: None,
        }
    }

    /// Weight and bias uniform in `±1/√d_in`.
    pub fn init_default(prefix: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        Linear::init_uniform(prefix, d_in, d_out, bound, bound, rng)
    }

    pub fn init_uniform(
        prefix: &str,
        d_in: usize,
        d_out: usize,
        weight_bound: f64,
        bias_bound: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Linear {
            weight: Param::uniform(format!("{prefix}.weight"), vec![d_out, d_in], weight_bound, rng),
            bias: Param::uniform(format!("{prefix}.bias"), vec![d_out], bias_bound, rng),
            input: None,
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        x.expect_cols(self.d_in(), &self.weight.name)?;
        let (d_in, d_out) = (self.d_in(), self.d_out());
        let w = &self.weight.value;
        let mut y = Matrix::zeros(x.rows, d_out);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = &mut y.data[r * d_out..(r + 1) * d_out];
            for (o, yo) in yr.iter_mut().enumerate() {
                let wr = &w[o * d_in..(o + 1) * d_in];
                *yo = self.bias.value[o] + wr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(y)
    }

    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let x = self.input.as_ref().ok_or_else(|| missing_forward(&self.weight.name))?;
        let (d_in, d_out) = (self.d_in(), self.d_out());
        dy.expect_cols(d_out, &self.weight.name)?;
        self.weight.grad.fill(0.0);
        self.bias.grad.fill(0.0);
        let mut dx = Matrix::zeros(x.rows, d_in);
        for r in 0..x.rows {
            let (xr, dyr) = (x.row(r), dy.row(r));
            let dxr = &mut dx.data[r * d_in..(r + 1) * d_in];
            for o in 0..d_out {
                let g = dyr[o];
                self.bias.grad[o] += g;
                let wr = &self.weight.value[o * d_in..(o + 1) * d_in];
                let gw = &mut self.weight.grad[o * d_in..(o + 1) * d_in];
                for i in 0..d_in {
                    gw[i] += g * xr[i];
                    dxr[i] += g * wr[i];
                }
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct BnCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

/// Per-feature batch normalization with affine scale and shift.
///
/// Training normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate; inference uses the running
/// estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub scale: Param,
    pub shift: Param,
    pub running_mean: Param,
    pub running_var: Param,
    /// Number of training batches folded into the running statistics.
    pub batches: Param,
    cache: Option<BnCache>,
}

impl BatchNorm {
    pub fn new(prefix: &str, features: usize) -> Self {
        BatchNorm {
            scale: Param::new(format!("{prefix}.scale"), vec![features], vec![1.0; features], ParamKind::Trainable),
            shift: Param::zeros(format!("{prefix}.shift"), vec![features], ParamKind::Trainable),
            running_mean: Param::zeros(format!("{prefix}.running_mean"), vec![features], ParamKind::Buffer),
            running_var: Param::new(
                format!("{prefix}.running_var"),
                vec![features],
                vec![1.0; features],
                ParamKind::Buffer,
            ),
            batches: Param::zeros(format!("{prefix}.batches"), vec![1], ParamKind::Buffer),
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.scale.value.len()
    }

    /// Batch-normalized values before scale and shift.
    pub fn normalize_batch(&self, x: &Matrix) -> Result<(Matrix, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let f = self.features();
        x.expect_cols(f, &self.scale.name)?;
        let n = x.rows;
        if n < 2 {
            return Err(Error::usage(format!(
                "{}: batch normalization needs at least 2 samples in training",
                self.scale.name
            )));
        }
        let mut mean = vec![0.0; f];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; f];
        for r in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut normalized = x.clone();
        for r in 0..n {
            let row = &mut normalized.data[r * f..(r + 1) * f];
            for c in 0..f {
                row[c] = (row[c] - mean[c]) * inv_std[c];
            }
        }
        Ok((normalized, mean, var, inv_std))
    }

    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        let (normalized, mean, var, inv_std) = self.normalize_batch(x)?;
        let n = x.rows as f64;
        for c in 0..self.features() {
            let unbiased = var[c] * n / (n - 1.0);
            self.running_mean.value[c] = (1.0 - BN_MOMENTUM) * self.running_mean.value[c] + BN_MOMENTUM * mean[c];
            self.running_var.value[c] = (1.0 - BN_MOMENTUM) * self.running_var.value[c] + BN_MOMENTUM * unbiased;
        }
        self.batches.value[0] += 1.0;
        let y = self.affine(&normalized);
        self.cache = Some(BnCache { normalized, inv_std });
        Ok(y)
    }

    fn affine(&self, normalized: &Matrix) -> Matrix {
        let f = self.features();
        let mut y = normalized.clone();
        for r in 0..y.rows {
            for c in 0..f {
                let v = &mut y.data[r * f + c];
                *v = self.scale.value[c] * *v + self.shift.value[c];
            }
        }
        y
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let f = self.features();
        x.expect_cols(f, &self.scale.name)?;
        if self.batches.value[0] < 1.0 {
            return Err(Error::State(format!(
                "{}: inference before any training batch populated the running statistics",
                self.scale.name
            )));
        }
        let mut y = x.clone();
        for r in 0..y.rows {
            for c in 0..f {
                let v = &mut y.data[r * f + c];
                let inv = 1.0 / (self.running_var.value[c] + BN_EPS).sqrt();
                *v = self.scale.value[c] * (*v - self.running_mean.value[c]) * inv + self.shift.value[c];
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let BnCache { normalized, inv_std } = self.cache.as_ref().ok_or_else(|| missing_forward(&self.scale.name))?;
        let f = self.features();
        dy.expect_cols(f, &self.scale.name)?;
        let n = dy.rows;
        let mut sum_dxhat = vec![0.0; f];
        let mut sum_dxhat_xhat = vec![0.0; f];
        self.scale.grad.fill(0.0);
        self.shift.grad.fill(0.0);
        for r in 0..n {
            for c in 0..f {
                let g = dy.get(r, c);
                let xh = normalized.get(r, c);
                self.scale.grad[c] += g * xh;
                self.shift.grad[c] += g;
                let dxh = g * self.scale.value[c];
                sum_dxhat[c] += dxh;
                sum_dxhat_xhat[c] += dxh * xh;
            }
        }
        let mut dx = Matrix::zeros(n, f);
        let nf = n as f64;
        for r in 0..n {
            for c in 0..f {
                let dxh = dy.get(r, c) * self.scale.value[c];
                let xh = normalized.get(r, c);
                dx.data[r * f + c] = inv_std[c] / nf * (nf * dxh - sum_dxhat[c] - xh * sum_dxhat_xhat[c]);
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.scale, &self.shift, &self.running_mean, &self.running_var, &self.batches]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.scale,
            &mut self.shift,
            &mut self.running_mean,
            &mut self.running_var,
            &mut self.batches,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    Tanh,
    /// `sin(ω z)`.
    Sine(f64),
}

#[derive(Debug, Clone)]
pub struct Activation {
    pub kind: ActivationKind,
    input: Option<Matrix>,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, input: None }
    }

    pub fn infer(&self, x: &Matrix) -> Matrix {
        match self.kind {
            ActivationKind::Relu => x.map(|v| v.max(0.0)),
            ActivationKind::Tanh => x.map(f64::tanh),
            ActivationKind::Sine(w) => x.map(|v| (w * v).sin()),
        }
    }

    pub fn forward_train(&mut self, x: &Matrix) -> Matrix {
        self.input = Some(x.clone());
        self.infer(x)
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let x = self.input.as_ref().ok_or_else(|| missing_forward("activation"))?;
        if x.rows != dy.rows || x.cols != dy.cols {
            return Err(Error::usage("activation: upstream shape mismatch"));
        }
        let local = |v: f64| match self.kind {
            ActivationKind::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => 1.0 - v.tanh().powi(2),
            ActivationKind::Sine(w) => w * (w * v).cos(),
        };
        let data = x.data.iter().zip(&dy.data).map(|(&v, &g)| g * local(v)).collect();
        Matrix::from_vec(x.rows, x.cols, data)
    }
}

/// Fixed random Fourier feature map `α [cos(2πBx); sin(2πBx)]`.
#[derive(Debug, Clone)]
pub struct RandomFourier {
    /// `m × d_in` frequency matrix.
    pub freqs: Param,
    pub alpha: f64,
    input: Option<Matrix>,
}

impl RandomFourier {
    pub fn new(prefix: &str, freqs: Vec<f64>, m: usize, d_in: usize, alpha: f64) -> Self {
        RandomFourier {
            freqs: Param::new(format!("{prefix}.freqs"), vec![m, d_in], freqs, ParamKind::Fixed),
            alpha,
            input: None,
        }
    }

    pub fn m(&self) -> usize {
        self.freqs.shape[0]
    }

    pub fn d_in(&self) -> usize {
        self.freqs.shape[1]
    }

    /// `2π b_k · x` for every frequency row.
    fn phases(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d_in();
        (0..self.m())
            .map(|k| {
                let b = &self.freqs.value[k * d..(k + 1) * d];
                std::f64::consts::TAU * b.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        x.expect_cols(self.d_in(), &self.freqs.name)?;
        let m = self.m();
        let mut y = Matrix::zeros(x.rows, 2 * m);
        for r in 0..x.rows {
            let p = self.phases(x.row(r));
            let yr = &mut y.data[r * 2 * m..(r + 1) * 2 * m];
            for k in 0..m {
                yr[k] = self.alpha * p[k].cos();
                yr[m + k] = self.alpha * p[k].sin();
            }
        }
        Ok(y)
    }

    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let x = self.input.as_ref().ok_or_else(|| missing_forward(&self.freqs.name))?;
        let (m, d) = (self.m(), self.d_in());
        let mut dx = Matrix::zeros(x.rows, d);
        for r in 0..x.rows {
            let p = self.phases(x.row(r));
            let g = dy.row(r);
            for k in 0..m {
                // d/dp of α cos p and α sin p
                let dp = self.alpha * (-g[k] * p[k].sin() + g[m + k] * p[k].cos());
                for i in 0..d {
                    dx.data[r * d + i] += dp * std::f64::consts::TAU * self.freqs.value[k * d + i];
                }
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Linear(Linear),
    BatchNorm(BatchNorm),
    Activation(Activation),
    RandomFourier(RandomFourier),
    Fgfs(Box<FgfsLayer>),
    Quantum(Box<QuantumLayer>),
}

impl Layer {
    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Linear(l) => l.forward_train(x),
            Layer::BatchNorm(l) => l.forward_train(x),
            Layer::Activation(l) => Ok(l.forward_train(x)),
            Layer::RandomFourier(l) => l.forward_train(x),
            Layer::Fgfs(l) => l.forward_train(x),
            Layer::Quantum(l) => l.forward_train(x),
        }
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Linear(l) => l.infer(x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Activation(l) => Ok(l.infer(x)),
            Layer::RandomFourier(l) => l.infer(x),
            Layer::Fgfs(l) => l.infer(x),
            Layer::Quantum(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Linear(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Activation(l) => l.backward(dy),
            Layer::RandomFourier(l) => l.backward(dy),
            Layer::Fgfs(l) => l.backward(dy),
            Layer::Quantum(l) => l.backward(dy),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Linear(l) => l.params(),
            Layer::BatchNorm(l) => l.params(),
            Layer::Activation(_) => Vec::new(),
            Layer::RandomFourier(l) => vec![&l.freqs],
            Layer::Fgfs(l) => l.params(),
            Layer::Quantum(l) => l.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Linear(l) => l.params_mut(),
            Layer::BatchNorm(l) => l.params_mut(),
            Layer::Activation(_) => Vec::new(),
            Layer::RandomFourier(l) => vec![&mut l.freqs],
            Layer::Fgfs(l) => l.params_mut(),
            Layer::Quantum(l) => l.params_mut(),
        }
    }

    /// Called after parameter values were replaced wholesale.
    pub fn refresh(&mut self) {
        if let Layer::Fgfs(l) = self {
            l.refresh_projection();
        }
    }
}

/// Layers applied in sequence.
#[derive(Debug, Clone, Default)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => {
                let mut h = x.clone();
                for layer in &mut self.layers {
                    h = layer.forward_train(&h)?;
                }
                Ok(h)
            }
        }
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Back-propagates `upstream` (∂loss/∂output) through every layer and
    /// returns the trainable-parameter gradient in [`Network::params`] order.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<GradientVector> {
        let mut g = upstream.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(self.gradient())
    }

    pub fn gradient(&self) -> GradientVector {
        GradientVector {
            values: self
                .params()
                .into_iter()
                .filter(|p| p.is_trainable())
                .flat_map(|p| p.grad.iter().copied())
                .collect(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| p.is_trainable())
            .map(|p| p.value.len())
            .sum()
    }
}
