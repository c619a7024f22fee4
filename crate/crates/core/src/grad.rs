//! Circuit gradients.
//!
//! Two independent routes: the two-point parameter-shift rule on the
//! reference simulator, and adjoint differentiation on the lane-batched
//! simulator. Training uses the adjoint route; the shift rule and
//! `finite_diff` serve as its oracles.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::circuit::{apply_gates, run_with_angles, ChunkAngles, CircuitSpec, ParamRole, ParamStore, CHUNK_LANES};
use crate::error::{Error, Result};
use crate::qsim::{BatchState, GateKind};

/// Gradient of a scalar with respect to every trainable scalar of an
/// object, in the order of its parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
}

impl GradientVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_inputs(spec: &CircuitSpec, features: &[f64], theta: &ParamStore, out_index: usize) -> Result<()> {
    if features.len() != spec.e_count() || theta.theta.len() != spec.t_count() {
        return Err(Error::usage(format!(
            "expected {} features and {} angles, got {} and {}",
            spec.e_count(),
            spec.t_count(),
            features.len(),
            theta.theta.len()
        )));
    }
    if out_index >= spec.n_qubits() {
        return Err(Error::usage(format!("output qubit {out_index} out of range")));
    }
    Ok(())
}

/// Sums `(f(+π/2) - f(-π/2)) / 2` over every gate whose role is `role`,
/// shifting each gate on its own.
fn shift_sum(
    spec: &CircuitSpec,
    features: &[f64],
    theta: &ParamStore,
    out_index: usize,
    role: ParamRole,
) -> Result<f64> {
    let mut total = 0.0;
    for (target, _) in spec.gates().iter().enumerate().filter(|(_, g)| g.role == role) {
        let eval = |shift: f64| -> Result<f64> {
            let state = run_with_angles(spec, |gi, g| {
                spec.angle_of(g, features, &theta.theta)
                    .map(|a| if gi == target { a + shift } else { a })
            })?;
            state.expectation_z(out_index)
        };
        total += (eval(FRAC_PI_2)? - eval(-FRAC_PI_2)?) / 2.0;
    }
    Ok(total)
}

/// ∂⟨Z_out⟩/∂θ_k by the parameter-shift rule.
pub fn param_shift(
    spec: &CircuitSpec,
    features: &[f64],
    theta: &ParamStore,
    out_index: usize,
    k: usize,
) -> Result<f64> {
    check_inputs(spec, features, theta, out_index)?;
    if k >= spec.t_count() {
        return Err(Error::usage(format!(
            "trainable index {k} out of range ({} parameters)",
            spec.t_count()
        )));
    }
    shift_sum(spec, features, theta, out_index, ParamRole::Trainable(k))
}

/// ∂⟨Z_out⟩/∂x_j, summing one shift term per gate driven by feature `j`.
pub fn encoding_shift(
    spec: &CircuitSpec,
    features: &[f64],
    theta: &ParamStore,
    out_index: usize,
    j: usize,
) -> Result<f64> {
    check_inputs(spec, features, theta, out_index)?;
    if j >= spec.e_count() {
        return Err(Error::usage(format!(
            "encoding index {j} out of range ({} features)",
            spec.e_count()
        )));
    }
    shift_sum(spec, features, theta, out_index, ParamRole::Encoding(j))
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, point: &[f64], index: usize, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::usage(format!("finite-difference step must be positive, got {step}")));
    }
    if index >= point.len() {
        return Err(Error::usage(format!("index {index} out of range for {}-vector", point.len())));
    }
    let mut x = point.to_vec();
    x[index] = point[index] + step;
    let plus = f(&x);
    x[index] = point[index] - step;
    let minus = f(&x);
    Ok((plus - minus) / (2.0 * step))
}

/// Forward pass record for adjoint differentiation.
///
/// Gates before the first encoding gate act identically on every sample, so
/// they are simulated once on a single lane and broadcast; their gradients
/// are accumulated from the lane-summed adjoint state.
#[derive(Debug, Clone)]
pub struct AdjointTape {
    prefix_len: usize,
    prefix_state: BatchState,
    prefix_angles: ChunkAngles,
    chunks: Vec<(BatchState, ChunkAngles)>,
    samples: usize,
}

impl AdjointTape {
    pub fn samples(&self) -> usize {
        self.samples
    }
}

/// Exact per-qubit ⟨Z⟩ for `features` (sample-major, `n × e_count`) and the
/// tape needed by [`adjoint_backward`].
pub fn adjoint_forward(spec: &CircuitSpec, features: &[f64], theta: &ParamStore) -> Result<(Vec<f64>, AdjointTape)> {
    let e = spec.e_count();
    let nq = spec.n_qubits();
    if theta.theta.len() != spec.t_count() {
        return Err(Error::usage(format!(
            "expected {} trainable angles, got {}",
            spec.t_count(),
            theta.theta.len()
        )));
    }
    if e == 0 || features.len() % e != 0 {
        return Err(Error::usage(format!(
            "feature buffer of length {} does not hold whole {e}-feature samples",
            features.len()
        )));
    }
    let samples = features.len() / e;
    let prefix_len = spec.input_independent_prefix();
    let prefix_angles = ChunkAngles::new(spec, &vec![0.0; e], &theta.theta, 1);
    let mut prefix_state = BatchState::new(nq, 1)?;
    apply_gates(spec, 0..prefix_len, &mut prefix_state, &prefix_angles);

    let chunks: Vec<(Vec<f64>, (BatchState, ChunkAngles))> = features
        .par_chunks(CHUNK_LANES * e)
        .map(|feats| {
            let lanes = feats.len() / e;
            let angles = ChunkAngles::new(spec, feats, &theta.theta, lanes);
            let mut state = BatchState::broadcast(&prefix_state, lanes);
            apply_gates(spec, prefix_len..spec.gates().len(), &mut state, &angles);
            let mut out = vec![0.0; lanes * nq];
            let mut z = vec![0.0; lanes];
            for q in 0..nq {
                state.expectation_z(q, &mut z);
                for l in 0..lanes {
                    out[l * nq + q] = z[l];
                }
            }
            (out, (state, angles))
        })
        .collect();
    let mut outputs = Vec::with_capacity(samples * nq);
    let mut tape = Vec::with_capacity(chunks.len());
    for (out, rec) in chunks {
        outputs.extend(out);
        tape.push(rec);
    }
    Ok((
        outputs,
        AdjointTape {
            prefix_len,
            prefix_state,
            prefix_angles,
            chunks: tape,
            samples,
        },
    ))
}

/// Walks `gates[range]` backwards, un-applying each gate to `psi` and
/// `lambda` and accumulating `Im⟨λ|Gψ⟩` into the gradient buffers.
/// `d_theta` receives lane sums; `d_feat` is lane-major.
#[allow(clippy::too_many_arguments)]
fn adjoint_sweep(
    spec: &CircuitSpec,
    range: std::ops::Range<usize>,
    psi: &mut BatchState,
    lambda: &mut BatchState,
    angles: &ChunkAngles,
    d_theta: &mut [f64],
    d_feat: &mut [f64],
) {
    let lanes = psi.lanes();
    let e = spec.e_count();
    let mut overlap = vec![0.0; lanes];
    let mut neg_sin = vec![0.0; lanes];
    for gi in range.rev() {
        let g = &spec.gates()[gi];
        let q = g.qubits()[0];
        match g.kind {
            GateKind::Cz => {
                psi.cz(q, g.qubits()[1]);
                lambda.cz(q, g.qubits()[1]);
            }
            GateKind::X => {
                psi.x(q);
                lambda.x(q);
            }
            GateKind::Sx => {
                psi.sx(q, true);
                lambda.sx(q, true);
            }
            kind => {
                let axis = kind.rotation().expect("parameterized");
                overlap.fill(0.0);
                lambda.generator_overlap(psi, axis, q, &mut overlap);
                match g.role {
                    ParamRole::Trainable(i) => d_theta[i] += overlap.iter().sum::<f64>(),
                    ParamRole::Encoding(k) => {
                        for l in 0..lanes {
                            d_feat[l * e + k] += overlap[l];
                        }
                    }
                    ParamRole::Fixed => unreachable!("validated circuit"),
                }
                for (n, s) in neg_sin.iter_mut().zip(&angles.sin[gi]) {
                    *n = -s;
                }
                psi.rotate(axis, q, &angles.cos[gi], &neg_sin);
                lambda.rotate(axis, q, &angles.cos[gi], &neg_sin);
            }
        }
    }
}

/// Gradients of `Σ_s Σ_q upstream[s, q] ⟨Z_q⟩_s`: the summed trainable-angle
/// gradient and the per-sample feature gradient (`n × e_count`).
pub fn adjoint_backward(spec: &CircuitSpec, tape: &AdjointTape, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nq = spec.n_qubits();
    let e = spec.e_count();
    if upstream.len() != tape.samples * nq {
        return Err(Error::usage(format!(
            "upstream gradient has {} entries, expected {}",
            upstream.len(),
            tape.samples * nq
        )));
    }
    let end = spec.gates().len();
    let per_chunk: Vec<(Vec<f64>, Vec<f64>, BatchState)> = tape
        .chunks
        .par_iter()
        .zip(upstream.par_chunks(CHUNK_LANES * nq))
        .map(|((final_state, angles), up)| -> Result<_> {
            let lanes = final_state.lanes();
            let mut psi = final_state.clone();
            let mut lambda = BatchState::new(nq, lanes)?;
            lambda.set_weighted_z(&psi, up);
            let mut d_theta = vec![0.0; spec.t_count()];
            let mut d_feat = vec![0.0; lanes * e];
            adjoint_sweep(spec, tape.prefix_len..end, &mut psi, &mut lambda, angles, &mut d_theta, &mut d_feat);
            let mut lambda_sum = BatchState::new(nq, 1)?;
            lambda_sum.zero();
            lambda.add_lane_sum_into(&mut lambda_sum);
            Ok((d_theta, d_feat, lambda_sum))
        })
        .collect::<Result<_>>()?;
    let mut d_theta = vec![0.0; spec.t_count()];
    let mut d_feat = Vec::with_capacity(tape.samples * e);
    let mut lambda = BatchState::new(nq, 1)?;
    lambda.zero();
    for (dt, df, ls) in per_chunk {
        for (acc, v) in d_theta.iter_mut().zip(dt) {
            *acc += v;
        }
        d_feat.extend(df);
        ls.add_lane_sum_into(&mut lambda);
    }
    // ⟨λ|Gψ⟩ is linear in λ, so the shared prefix needs one sweep.
    let mut psi = tape.prefix_state.clone();
    let mut unused = vec![0.0; e];
    adjoint_sweep(
        spec,
        0..tape.prefix_len,
        &mut psi,
        &mut lambda,
        &tape.prefix_angles,
        &mut d_theta,
        &mut unused,
    );
    Ok((d_theta, d_feat))
}

/// Gradients of `Σ_q weights[q] ⟨Z_q⟩` for one sample via adjoint
/// differentiation: `(d/dθ, d/dx)`.
pub fn adjoint_gradient(
    spec: &CircuitSpec,
    features: &[f64],
    theta: &ParamStore,
    weights: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(spec, features, theta, 0)?;
    if weights.len() != spec.n_qubits() {
        return Err(Error::usage("one observable weight per qubit required"));
    }
    if spec.e_count() == 0 {
        // adjoint_forward needs at least one feature column; pad a dummy.
        let padded = pad_encoding(spec)?;
        let (_, tape) = adjoint_forward(&padded, &[0.0], theta)?;
        let (dt, _) = adjoint_backward(&padded, &tape, weights)?;
        return Ok((dt, Vec::new()));
    }
    let (_, tape) = adjoint_forward(spec, features, theta)?;
    adjoint_backward(spec, &tape, weights)
}

/// Appends an identity-valued encoding on qubit 0 (evaluated at angle 0).
fn pad_encoding(spec: &CircuitSpec) -> Result<CircuitSpec> {
    let mut gates = spec.gates().to_vec();
    gates.push(crate::circuit::Gate::one(GateKind::Rz, 0, ParamRole::Encoding(0)));
    CircuitSpec::new(spec.n_qubits(), gates)
}
