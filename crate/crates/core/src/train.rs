//! MSE loss, Adam, and the full-batch training loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageGrid;
use crate::models::Model;
use crate::nn::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Must stay 0: gradients come from exact evaluation.
    pub shots: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shots: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.shots != 0 {
            return Err(Error::Config(
                "training uses exact expectations; shots apply to inference only".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::usage(format!(
            "mse needs equal non-empty inputs, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// One bias-corrected Adam update in place. A non-finite gradient aborts
/// before any parameter changes.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::usage(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite gradient at index {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Trains on every pixel of `grid` each epoch. Returns the loss measured
/// at the start of each epoch.
pub fn fit(model: &mut Model, grid: &ImageGrid, cfg: &TrainConfig) -> Result<Vec<f64>> {
    fit_observed(model, grid, cfg, |_, _| {})
}

pub fn fit_observed(
    model: &mut Model,
    grid: &ImageGrid,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::usage("cannot train on an empty grid"));
    }
    let n = grid.len() as f64;
    let mut params = model.trainable_values();
    let mut state = AdamState::new(params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let pred = model.forward(&grid.coords, Mode::Train)?;
        let loss = mse(&pred, &grid.targets)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss became {loss} at epoch {epoch}")));
        }
        history.push(loss);
        observe(epoch, loss);
        let upstream: Vec<f64> = pred.iter().zip(&grid.targets).map(|(p, t)| 2.0 * (p - t) / n).collect();
        let grad = model.backward(&upstream)?;
        adam_step(&mut params, &grad.values, &mut state, cfg).map_err(|e| match e {
            Error::Numerical(_) => {
                let i = grad.values.iter().position(|g| !g.is_finite()).unwrap_or(0);
                let name = model
                    .trainable_slices()
                    .into_iter()
                    .find(|(_, r)| r.contains(&i))
                    .map(|(name, r)| format!("{name}[{}]", i - r.start))
                    .unwrap_or_else(|| format!("index {i}"));
                Error::Numerical(format!("non-finite gradient in {name} at epoch {epoch}"))
            }
            other => other,
        })?;
        model.set_trainable_values(&params)?;
    }
    Ok(history)
}
