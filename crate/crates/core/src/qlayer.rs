//! Circuit evaluation as a network layer: encoding features in, per-qubit
//! ⟨Z⟩ out.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{evaluate_batch, CircuitSpec, ParamStore};
use crate::error::{Error, Result};
use crate::grad::{adjoint_backward, adjoint_forward, encoding_shift, param_shift, AdjointTape};
use crate::nn::{Matrix, Param, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    #[default]
    Adjoint,
    /// Two evaluations per gate and output; only practical for small circuits.
    ParameterShift,
}

#[derive(Debug, Clone)]
pub struct QuantumLayer {
    pub circuit: Arc<CircuitSpec>,
    pub theta: Param,
    pub method: GradientMethod,
    /// Measurement shots for inference; 0 is exact. Training is always exact.
    pub shots: u64,
    pub shot_seed: u64,
    tape: Option<AdjointTape>,
    input: Option<Matrix>,
}

impl QuantumLayer {
    pub fn new(circuit: Arc<CircuitSpec>, theta: ParamStore) -> Result<Self> {
        if theta.theta.len() != circuit.t_count() {
            return Err(Error::usage(format!(
                "circuit has {} trainable angles, got {}",
                circuit.t_count(),
                theta.theta.len()
            )));
        }
        let n = theta.theta.len();
        Ok(QuantumLayer {
            circuit,
            theta: Param::new("quantum.theta", vec![n], theta.theta, ParamKind::Trainable),
            method: GradientMethod::Adjoint,
            shots: 0,
            shot_seed: 0,
            tape: None,
            input: None,
        })
    }

    fn store(&self) -> ParamStore {
        ParamStore {
            theta: self.theta.value.clone(),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.circuit.e_count() {
            return Err(Error::usage(format!(
                "circuit takes {} encoding features, input has {} columns",
                self.circuit.e_count(),
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let out = evaluate_batch(&self.circuit, x.data(), &self.store(), self.shots, self.shot_seed)?;
        Matrix::from_vec(x.rows(), self.circuit.n_qubits(), out)
    }

    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let nq = self.circuit.n_qubits();
        match self.method {
            GradientMethod::Adjoint => {
                let (out, tape) = adjoint_forward(&self.circuit, x.data(), &self.store())?;
                self.tape = Some(tape);
                self.input = Some(x.clone());
                Matrix::from_vec(x.rows(), nq, out)
            }
            GradientMethod::ParameterShift => {
                let out = evaluate_batch(&self.circuit, x.data(), &self.store(), 0, 0)?;
                self.input = Some(x.clone());
                Matrix::from_vec(x.rows(), nq, out)
            }
        }
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let x = self.input.as_ref().ok_or_else(|| Error::usage("quantum layer: backward called before forward"))?;
        let nq = self.circuit.n_qubits();
        if dy.rows() != x.rows() || dy.cols() != nq {
            return Err(Error::usage("quantum layer: upstream shape mismatch"));
        }
        let e = self.circuit.e_count();
        match self.method {
            GradientMethod::Adjoint => {
                let tape = self.tape.as_ref().ok_or_else(|| Error::usage("quantum layer: no adjoint tape"))?;
                let (d_theta, d_feat) = adjoint_backward(&self.circuit, tape, dy.data())?;
                self.theta.grad = d_theta;
                Matrix::from_vec(x.rows(), e, d_feat)
            }
            GradientMethod::ParameterShift => {
                let store = self.store();
                let mut d_theta = vec![0.0; self.circuit.t_count()];
                let mut d_feat = Matrix::zeros(x.rows(), e);
                for s in 0..x.rows() {
                    let feats = x.row(s);
                    for q in 0..nq {
                        let w = dy.get(s, q);
                        if w == 0.0 {
                            continue;
                        }
                        for (k, acc) in d_theta.iter_mut().enumerate() {
                            *acc += w * param_shift(&self.circuit, feats, &store, q, k)?;
                        }
                        for j in 0..e {
                            d_feat.data_mut()[s * e + j] += w * encoding_shift(&self.circuit, feats, &store, q, j)?;
                        }
                    }
                }
                self.theta.grad = d_theta;
                Ok(d_feat)
            }
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.theta]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.theta]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;
    use rand::{Rng, SeedableRng};

    #[test]
    fn adjoint_and_parameter_shift_layers_agree() {
        let spec = Arc::new(
            parse_circuit("qubits 2\nry 0 par 0\nrx 1 enc 0\ncz 0 1\nrx 0 enc 1\nrz 1 par 1\nry 1 enc 0\nsx 0\nry 0 par 2\n")
                .unwrap(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let theta = ParamStore::random(&spec, &mut rng);
        let x = Matrix::from_vec(3, 2, (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let dy = Matrix::from_vec(3, 2, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();

        let mut a = QuantumLayer::new(spec.clone(), theta.clone()).unwrap();
        let mut b = QuantumLayer::new(spec, theta).unwrap();
        b.method = GradientMethod::ParameterShift;
        let ya = a.forward_train(&x).unwrap();
        let yb = b.forward_train(&x).unwrap();
        for (u, v) in ya.data().iter().zip(yb.data()) {
            assert!((u - v).abs() < 1e-12);
        }
        let da = a.backward(&dy).unwrap();
        let db = b.backward(&dy).unwrap();
        for (u, v) in da.data().iter().zip(db.data()) {
            assert!((u - v).abs() < 1e-10);
        }
        for (u, v) in a.theta.grad.iter().zip(&b.theta.grad) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
