//! Objective assembly, parameter-shift gradients, projected gradient
//! descent for single-instance solves, and mini-batch training of the
//! data-embedded model.
//!
//! The cost is `f(θ, α) = α² G̃(θ) - 2α G(θ; b) + Σ_s b_s²`, which equals
//! `Σ_s (α F_s(θ) - b_s)²` identically. Gradients in θ use the parameter
//! shift rule; the quartic term's gradient shifts one replica of the joint
//! state and doubles the result, which the swap symmetry of `Σ_s H_s ⊗ H_s`
//! justifies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{nmae, SpecSet};
use crate::qsim::{CircuitSpec, StateVector};
use crate::vqc::{AnsatzConfig, EmbeddingConfig, Normalizer, VqcModel};
use crate::xbm::{self, XbmDecomposition};

const SHIFT: f64 = std::f64::consts::FRAC_PI_2;

/// A specification set, its measurement decomposition, and the prepared
/// circuit (data embedding, when present, ahead of the trainable ansatz).
pub struct QpfProblem<'a> {
    pub specs: &'a SpecSet,
    pub decomp: &'a XbmDecomposition,
    circuit: CircuitSpec,
}

impl<'a> QpfProblem<'a> {
    pub fn new(
        specs: &'a SpecSet,
        decomp: &'a XbmDecomposition,
        ansatz: &CircuitSpec,
        embedding: Option<&CircuitSpec>,
    ) -> Result<Self> {
        if ansatz.n_qubits() != specs.n_qubits() || decomp.n_qubits != specs.n_qubits() {
            return Err(Error::LengthMismatch {
                expected: specs.n_qubits(),
                actual: ansatz.n_qubits(),
            });
        }
        if ansatz.data_count() != 0 {
            return Err(Error::Invalid("ansatz must not carry data slots".into()));
        }
        let circuit = match embedding {
            Some(embed) => {
                if embed.weight_count() != 0 {
                    return Err(Error::Invalid("embedding must not carry weight slots".into()));
                }
                embed.chain(ansatz)?
            }
            None => ansatz.clone(),
        };
        Ok(QpfProblem { specs, decomp, circuit })
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }

    pub fn weight_count(&self) -> usize {
        self.circuit.weight_count()
    }

    pub fn data_count(&self) -> usize {
        self.circuit.data_count()
    }

    pub fn s_count(&self) -> usize {
        self.specs.n_specs()
    }
}

/// Step sizes, schedules, and termination for gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mu_theta: f64,
    pub mu_alpha: f64,
    /// Per-iteration multiplicative step decay (1.0 = constant steps).
    pub decay: f64,
    pub max_iters: usize,
    /// Stop once the joint gradient norm falls below this.
    pub grad_tol: f64,
    /// Projection bound: α stays in [0, alpha_cap].
    pub alpha_cap: f64,
    /// Mini-batch size for training; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Record every `trace_stride`-th iteration (the last one always).
    pub trace_stride: usize,
    /// 0 = exact expectations, otherwise shot-sampled measurement.
    pub shots: usize,
}

impl TrainConfig {
    /// Single-instance settings: constant steps of 5e-5, gradient-norm
    /// termination at 0.01, α capped at 1.1²·N.
    pub fn single_instance(n_buses: usize) -> Self {
        TrainConfig {
            mu_theta: 5e-5,
            mu_alpha: 5e-5,
            decay: 1.0,
            max_iters: 2_000_000,
            grad_tol: 0.01,
            alpha_cap: 1.21 * n_buses as f64,
            batch_size: 0,
            seed: 0,
            trace_stride: 1,
            shots: 0,
        }
    }

    /// Multi-instance training settings with the 0.9995 step decay.
    pub fn qml(n_buses: usize) -> Self {
        TrainConfig {
            mu_theta: 0.02,
            mu_alpha: 0.02,
            decay: 0.9995,
            max_iters: 4000,
            grad_tol: 0.01,
            alpha_cap: 1.21 * n_buses as f64,
            batch_size: 0,
            seed: 0,
            trace_stride: 1,
            shots: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Invalid(format!("decay {} outside (0, 1]", self.decay)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Invalid("grad_tol must be positive".into()));
        }
        if !(self.alpha_cap > 0.0) {
            return Err(Error::Invalid("alpha_cap must be positive".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::Invalid("trace_stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub nmae: f64,
    pub grad_norm: f64,
    pub alpha: f64,
}

/// Append-only per-iteration optimization record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,objective,nmae,grad_norm,alpha")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.iter, r.objective, r.nmae, r.grad_norm, r.alpha)?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Which algebraic route computes the quartic term's θ-gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradRoute {
    /// Shift one replica of the joint state, double by swap symmetry.
    ShiftedReplica,
    /// Chain rule Σ_s 2 F_s ∇F_s (cross-check path).
    PerSpecChain,
}

/// Forward/shift evaluator with snapshot reuse: the state is checkpointed
/// before every weight gate, so a shifted evaluation replays only the
/// circuit suffix.
struct Engine<'p> {
    circuit: &'p CircuitSpec,
    decomp: &'p XbmDecomposition,
    angles: Vec<f64>,
    rotation_gate: Vec<bool>,
    weight_positions: Vec<usize>,
    snapshots: Vec<StateVector>,
    state: StateVector,
    scratch: StateVector,
    probs: Vec<f64>,
    f_base: Vec<f64>,
    shots: usize,
    shot_seed: u64,
    shot_counter: u64,
}

impl<'p> Engine<'p> {
    fn new(problem: &'p QpfProblem, data: &[f64], shots: usize, shot_seed: u64) -> Result<Self> {
        let circuit = problem.circuit();
        let p = circuit.weight_count();
        let angles_opt = circuit.resolve_angles(&vec![0.0; p], data)?;
        let angles: Vec<f64> = angles_opt.iter().map(|a| a.unwrap_or(0.0)).collect();
        let rotation_gate: Vec<bool> =
            circuit.gates().iter().map(|sg| sg.gate.is_rotation()).collect();
        let mut weight_positions = vec![usize::MAX; p];
        for (pos, sg) in circuit.gates().iter().enumerate() {
            if let crate::qsim::ParamSlot::Weight(k) = sg.slot {
                weight_positions[k] = pos;
            }
        }
        debug_assert!(weight_positions.windows(2).all(|w| w[0] < w[1]));
        let zero = StateVector::zero(circuit.n_qubits())?;
        Ok(Engine {
            circuit,
            decomp: problem.decomp,
            angles,
            rotation_gate,
            weight_positions,
            snapshots: vec![zero.clone(); p],
            state: zero.clone(),
            scratch: zero,
            probs: vec![0.0; problem.decomp.dim()],
            f_base: vec![0.0; problem.s_count()],
            shots,
            shot_seed,
            shot_counter: 0,
        })
    }

    fn reset_state(state: &mut StateVector) {
        let amps = state.amps_mut();
        amps.fill(num_complex::Complex64::new(0.0, 0.0));
        amps[0] = num_complex::Complex64::new(1.0, 0.0);
    }

    fn apply_range(&mut self, into_scratch: bool, from: usize, to: usize) {
        let gates = self.circuit.gates();
        let angles = &self.angles;
        let rotation = &self.rotation_gate;
        let target = if into_scratch { &mut self.scratch } else { &mut self.state };
        for pos in from..to {
            let value = if rotation[pos] { Some(angles[pos]) } else { None };
            target
                .apply_in_place(&gates[pos].gate, value)
                .expect("validated circuit");
        }
    }

    fn eval_f(&mut self, use_scratch: bool, out: &mut [f64]) {
        let state = if use_scratch { &self.scratch } else { &self.state };
        if self.shots == 0 {
            xbm::measure_f_s_into(state, self.decomp, &mut self.probs, out);
        } else {
            let seed = self
                .shot_seed
                .wrapping_add(self.shot_counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            self.shot_counter += 1;
            let f = xbm::measure_f_s_sampled(state, self.decomp, self.shots, seed)
                .expect("validated shot config");
            out.copy_from_slice(&f);
        }
    }

    /// Full forward pass at θ, leaving snapshots and the base F table ready.
    fn forward(&mut self, theta: &[f64]) {
        for (k, &pos) in self.weight_positions.iter().enumerate() {
            self.angles[pos] = theta[k];
        }
        Self::reset_state(&mut self.state);
        let mut cursor = 0;
        for k in 0..self.weight_positions.len() {
            let pos = self.weight_positions[k];
            self.apply_range(false, cursor, pos);
            self.snapshots[k].copy_from(&self.state);
            self.apply_range(false, pos, pos + 1);
            cursor = pos + 1;
        }
        self.apply_range(false, cursor, self.circuit.gate_count());
        let mut f = std::mem::take(&mut self.f_base);
        self.eval_f(false, &mut f);
        self.f_base = f;
    }

    /// F table at θ with weight `k` shifted by ±π/2, replayed from its
    /// snapshot.
    fn f_shifted(&mut self, k: usize, delta: f64, out: &mut [f64]) {
        let pos = self.weight_positions[k];
        let gates = self.circuit.gates();
        self.scratch.copy_from(&self.snapshots[k]);
        self.scratch
            .apply_in_place(&gates[pos].gate, Some(self.angles[pos] + delta))
            .expect("validated circuit");
        self.apply_range(true, pos + 1, self.circuit.gate_count());
        self.eval_f(true, out);
    }

    /// (grad_theta, grad_alpha) of f at the current forward point.
    fn gradient(
        &mut self,
        alpha: f64,
        b: &[f64],
        route: GradRoute,
        f_plus: &mut [f64],
        f_minus: &mut [f64],
    ) -> (Vec<f64>, f64) {
        let p = self.weight_positions.len();
        let mut grad = vec![0.0; p];
        for k in 0..p {
            self.f_shifted(k, SHIFT, f_plus);
            self.f_shifted(k, -SHIFT, f_minus);
            let (d_gtilde, d_g) = match route {
                GradRoute::ShiftedReplica => {
                    // mixed replica values Σ_s F_s(θ±) F_s(θ), doubled halves
                    let mix_plus = dot(f_plus, &self.f_base);
                    let mix_minus = dot(f_minus, &self.f_base);
                    let g_plus = dot(f_plus, b);
                    let g_minus = dot(f_minus, b);
                    (mix_plus - mix_minus, 0.5 * (g_plus - g_minus))
                }
                GradRoute::PerSpecChain => {
                    let mut d_gtilde = 0.0;
                    let mut d_g = 0.0;
                    for s in 0..self.f_base.len() {
                        let df = 0.5 * (f_plus[s] - f_minus[s]);
                        d_gtilde += 2.0 * self.f_base[s] * df;
                        d_g += b[s] * df;
                    }
                    (d_gtilde, d_g)
                }
            };
            grad[k] = alpha * alpha * d_gtilde - 2.0 * alpha * d_g;
        }
        let g_tilde = dot(&self.f_base, &self.f_base);
        let g = dot(&self.f_base, b);
        let grad_alpha = 2.0 * alpha * g_tilde - 2.0 * g;
        (grad, grad_alpha)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual_objective(f: &[f64], alpha: f64, b: &[f64]) -> f64 {
    f.iter()
        .zip(b)
        .map(|(&fs, &bs)| {
            let r = alpha * fs - bs;
            r * r
        })
        .sum()
}

/// f(θ, α) = α²·G̃(θ) - 2α·G(θ; b) + Σ_s b_s², through the grouped
/// measurement protocol.
pub fn objective(problem: &QpfProblem, theta: &[f64], alpha: f64, b: &[f64]) -> Result<f64> {
    objective_with_data(problem, theta, alpha, &[], b)
}

pub fn objective_with_data(
    problem: &QpfProblem,
    theta: &[f64],
    alpha: f64,
    data: &[f64],
    b: &[f64],
) -> Result<f64> {
    let state = problem.circuit.run(theta, data)?;
    objective_for_state(problem.decomp, &state, alpha, b)
}

/// Objective at an explicitly prepared state.
pub fn objective_for_state(
    decomp: &XbmDecomposition,
    state: &StateVector,
    alpha: f64,
    b: &[f64],
) -> Result<f64> {
    let g_tilde = xbm::measure_g_tilde(state, decomp)?;
    let g = xbm::measure_g(state, decomp, b)?;
    let b_sq: f64 = b.iter().map(|x| x * x).sum();
    Ok(alpha * alpha * g_tilde - 2.0 * alpha * g + b_sq)
}

/// Same cost via the per-spec route Σ_s (α F_s - b_s)²; used as the
/// algebraic cross-check and as the finite-difference oracle's evaluator.
pub fn objective_direct(
    problem: &QpfProblem,
    theta: &[f64],
    alpha: f64,
    data: &[f64],
    b: &[f64],
) -> Result<f64> {
    let state = problem.circuit.run(theta, data)?;
    let f = xbm::measure_f_s(&state, problem.decomp)?;
    Ok(residual_objective(&f, alpha, b))
}

/// Parameter-shift gradient of f in θ.
pub fn psr_grad_theta(
    problem: &QpfProblem,
    theta: &[f64],
    alpha: f64,
    b: &[f64],
) -> Result<Vec<f64>> {
    psr_grad_theta_via(problem, theta, alpha, &[], b, GradRoute::ShiftedReplica)
}

pub fn psr_grad_theta_via(
    problem: &QpfProblem,
    theta: &[f64],
    alpha: f64,
    data: &[f64],
    b: &[f64],
    route: GradRoute,
) -> Result<Vec<f64>> {
    check_lengths(problem, theta, data, b)?;
    let mut engine = Engine::new(problem, data, 0, 0)?;
    engine.forward(theta);
    let s = problem.s_count();
    let (grad, _) = engine.gradient(alpha, b, route, &mut vec![0.0; s], &mut vec![0.0; s]);
    Ok(grad)
}

/// ∂f/∂α = 2α·G̃(θ) - 2·G(θ; b).
pub fn grad_alpha(problem: &QpfProblem, theta: &[f64], alpha: f64, b: &[f64]) -> Result<f64> {
    grad_alpha_with_data(problem, theta, alpha, &[], b)
}

pub fn grad_alpha_with_data(
    problem: &QpfProblem,
    theta: &[f64],
    alpha: f64,
    data: &[f64],
    b: &[f64],
) -> Result<f64> {
    let state = problem.circuit.run(theta, data)?;
    let g_tilde = xbm::measure_g_tilde(&state, problem.decomp)?;
    let g = xbm::measure_g(&state, problem.decomp, b)?;
    Ok(2.0 * alpha * g_tilde - 2.0 * g)
}

fn check_lengths(problem: &QpfProblem, theta: &[f64], data: &[f64], b: &[f64]) -> Result<()> {
    if theta.len() != problem.weight_count() {
        return Err(Error::LengthMismatch {
            expected: problem.weight_count(),
            actual: theta.len(),
        });
    }
    if data.len() != problem.data_count() {
        return Err(Error::LengthMismatch { expected: problem.data_count(), actual: data.len() });
    }
    if b.len() != problem.s_count() {
        return Err(Error::LengthMismatch { expected: problem.s_count(), actual: b.len() });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SingleSolve {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: TrainTrace,
}

/// Projected gradient descent on one instance: θ step, then α step clamped
/// to [0, alpha_cap]. Stops when the joint gradient norm drops below
/// `grad_tol` or the iteration budget runs out, returning the best iterate.
pub fn solve_single(
    problem: &QpfProblem,
    b: &[f64],
    data: &[f64],
    theta0: &[f64],
    alpha0: f64,
    cfg: &TrainConfig,
) -> Result<SingleSolve> {
    cfg.validate()?;
    check_lengths(problem, theta0, data, b)?;
    let mut engine = Engine::new(problem, data, cfg.shots, cfg.seed)?;
    let s = problem.s_count();
    let mut f_plus = vec![0.0; s];
    let mut f_minus = vec![0.0; s];

    let mut theta = theta0.to_vec();
    let mut alpha = alpha0.max(0.0);
    let mut mu_theta = cfg.mu_theta;
    let mut mu_alpha = cfg.mu_alpha;
    let mut trace = TrainTrace::default();
    let mut best = (f64::INFINITY, theta.clone(), alpha);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..=cfg.max_iters {
        iterations = iter;
        engine.forward(&theta);
        let obj = residual_objective(&engine.f_base, alpha, b);
        let nm = batch_nmae(&engine.f_base, alpha, b);
        let (grad, galpha) =
            engine.gradient(alpha, b, GradRoute::ShiftedReplica, &mut f_plus, &mut f_minus);
        let gnorm = (dot(&grad, &grad) + galpha * galpha).sqrt();

        if obj.is_finite() && obj < best.0 {
            best = (obj, theta.clone(), alpha);
        }
        let stop = gnorm < cfg.grad_tol || iter == cfg.max_iters || !obj.is_finite();
        if iter % cfg.trace_stride == 0 || stop {
            trace.records.push(TraceRecord { iter, objective: obj, nmae: nm, grad_norm: gnorm, alpha });
        }
        if gnorm < cfg.grad_tol {
            converged = true;
            best = (obj, theta.clone(), alpha);
            break;
        }
        if stop {
            break;
        }

        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= mu_theta * g;
        }
        alpha = (alpha - mu_alpha * galpha).clamp(0.0, cfg.alpha_cap);
        mu_theta *= cfg.decay;
        mu_alpha *= cfg.decay;
    }

    Ok(SingleSolve { theta: best.1, alpha: best.2, converged, iterations, trace })
}

fn batch_nmae(f: &[f64], alpha: f64, b: &[f64]) -> f64 {
    let b_hat: Vec<f64> = f.iter().map(|&fs| alpha * fs).collect();
    nmae(&b_hat, b).unwrap_or(f64::NAN)
}

/// Training inputs: raw specification vectors (the loss targets) and their
/// padded embedding angles.
#[derive(Debug, Clone)]
pub struct QmlTrainingData {
    pub raw: Vec<Vec<f64>>,
    pub angles: Vec<Vec<f64>>,
}

impl QmlTrainingData {
    /// Normalizes a set of raw instances through a fitted normalizer and
    /// pads the angles to the embedding slot count.
    pub fn prepare(
        raw: &[Vec<f64>],
        normalizer: &Normalizer,
        embedding: &EmbeddingConfig,
    ) -> Result<Self> {
        let angles = raw
            .iter()
            .map(|b| embedding.pad(&normalizer.apply(b)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(QmlTrainingData { raw: raw.to_vec(), angles })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Trains the data-embedded model by averaged-gradient descent over
/// mini-batches (full batch when `batch_size` is 0), returning the model
/// artifact and the per-iteration trace.
#[allow(clippy::too_many_arguments)]
pub fn train_qml(
    problem: &QpfProblem,
    ansatz_cfg: &AnsatzConfig,
    embed_cfg: &EmbeddingConfig,
    normalizer: &Normalizer,
    data: &QmlTrainingData,
    theta0: &[f64],
    alpha0: f64,
    cfg: &TrainConfig,
) -> Result<(VqcModel, TrainTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("training batch is empty".into()));
    }
    for (raw, angles) in data.raw.iter().zip(&data.angles) {
        if raw.len() != problem.s_count() || angles.len() != problem.data_count() {
            return Err(Error::LengthMismatch {
                expected: problem.s_count(),
                actual: raw.len(),
            });
        }
    }
    if theta0.len() != problem.weight_count() {
        return Err(Error::LengthMismatch {
            expected: problem.weight_count(),
            actual: theta0.len(),
        });
    }

    let t_total = data.len();
    let mut engines = data
        .angles
        .iter()
        .enumerate()
        .map(|(t, angles)| Engine::new(problem, angles, cfg.shots, cfg.seed ^ (t as u64) << 32))
        .collect::<Result<Vec<_>>>()?;

    let p = problem.weight_count();
    let s = problem.s_count();
    let mut theta = theta0.to_vec();
    let mut alpha = alpha0.max(0.0);
    let mut mu_theta = cfg.mu_theta;
    let mut mu_alpha = cfg.mu_alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = TrainTrace::default();
    let mut best = (f64::INFINITY, theta.clone(), alpha);

    for iter in 0..=cfg.max_iters {
        // multiplicity per instance for this iteration's batch
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        let batch_len = if cfg.batch_size == 0 || cfg.batch_size >= t_total {
            for t in 0..t_total {
                counts.insert(t, 1);
            }
            t_total
        } else {
            for _ in 0..cfg.batch_size {
                let t = rng.random_range(0..t_total);
                *counts.entry(t).or_insert(0) += 1;
            }
            cfg.batch_size
        };

        struct PerInstance {
            grad: Vec<f64>,
            grad_alpha: f64,
            objective: f64,
            nmae: f64,
            weight: f64,
        }

        let theta_ref = &theta;
        let results: Vec<PerInstance> = engines
            .par_iter_mut()
            .enumerate()
            .filter_map(|(t, engine)| counts.get(&t).map(|&c| (t, engine, c)))
            .map(|(t, engine, mult)| {
                engine.forward(theta_ref);
                let b = &data.raw[t];
                let mut f_plus = vec![0.0; s];
                let mut f_minus = vec![0.0; s];
                let (grad, grad_alpha) = engine.gradient(
                    alpha,
                    b,
                    GradRoute::ShiftedReplica,
                    &mut f_plus,
                    &mut f_minus,
                );
                PerInstance {
                    grad,
                    grad_alpha,
                    objective: residual_objective(&engine.f_base, alpha, b),
                    nmae: batch_nmae(&engine.f_base, alpha, b),
                    weight: mult as f64,
                }
            })
            .collect();

        let inv = 1.0 / batch_len as f64;
        let mut grad = vec![0.0; p];
        let mut galpha = 0.0;
        let mut obj = 0.0;
        let mut nm = 0.0;
        for r in &results {
            for (g, gi) in grad.iter_mut().zip(&r.grad) {
                *g += r.weight * gi;
            }
            galpha += r.weight * r.grad_alpha;
            obj += r.weight * r.objective;
            nm += r.weight * r.nmae;
        }
        for g in grad.iter_mut() {
            *g *= inv;
        }
        galpha *= inv;
        obj *= inv;
        nm *= inv;
        let gnorm = (dot(&grad, &grad) + galpha * galpha).sqrt();

        if obj.is_finite() && obj < best.0 {
            best = (obj, theta.clone(), alpha);
        }
        let stop = gnorm < cfg.grad_tol || iter == cfg.max_iters || !obj.is_finite();
        if iter % cfg.trace_stride == 0 || stop {
            trace.records.push(TraceRecord { iter, objective: obj, nmae: nm, grad_norm: gnorm, alpha });
        }
        if gnorm < cfg.grad_tol {
            best = (obj, theta.clone(), alpha);
            break;
        }
        if stop {
            break;
        }

        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= mu_theta * g;
        }
        alpha = (alpha - mu_alpha * galpha).clamp(0.0, cfg.alpha_cap);
        mu_theta *= cfg.decay;
        mu_alpha *= cfg.decay;
    }

    let model = VqcModel {
        ansatz: *ansatz_cfg,
        embedding: *embed_cfg,
        normalizer: normalizer.clone(),
        theta: best.1,
        alpha: best.2,
    };
    Ok((model, trace))
}

/// Per-instance NMAE of a trained model on raw specification vectors.
/// With `shots > 0` the spec expectations are shot-sampled.
pub fn evaluate(
    model: &VqcModel,
    specs: &SpecSet,
    decomp: &XbmDecomposition,
    instances: &[Vec<f64>],
    shots: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let ansatz = crate::vqc::build_ansatz(&model.ansatz)?;
    let embedding = crate::vqc::build_embedding(&model.embedding)?;
    let circuit = embedding.chain(&ansatz)?;
    if model.theta.len() != circuit.weight_count() {
        return Err(Error::LengthMismatch {
            expected: circuit.weight_count(),
            actual: model.theta.len(),
        });
    }
    if model.normalizer.len() != specs.n_specs() {
        return Err(Error::LengthMismatch {
            expected: specs.n_specs(),
            actual: model.normalizer.len(),
        });
    }
    let mut out = Vec::with_capacity(instances.len());
    for (t, b) in instances.iter().enumerate() {
        let angles = model.embedding.pad(&model.normalizer.apply(b)?)?;
        let state = circuit.run(&model.theta, &angles)?;
        let f = if shots == 0 {
            xbm::measure_f_s(&state, decomp)?
        } else {
            xbm::measure_f_s_sampled(&state, decomp, shots, seed.wrapping_add(t as u64))?
        };
        let b_hat: Vec<f64> = f.iter().map(|&fs| model.alpha * fs).collect();
        out.push(nmae(&b_hat, b)?);
    }
    Ok(out)
}
