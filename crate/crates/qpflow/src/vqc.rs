//! Trainable circuit construction: the hardware-efficient ansatz, the
//! data-embedding block, input normalization, and the flat-voltage-profile
//! weight initialization.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::InstanceBatch;
use crate::qsim::{CircuitSpec, Gate, GateKind, StateVector};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Layered hardware-efficient ansatz: an initial RY layer, then `layers`
/// blocks of [RY layer, RZ layer, cyclic CNOT ring], for
/// `P = n + 2·n·layers` trainable angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub n_qubits: usize,
    pub layers: usize,
}

impl AnsatzConfig {
    pub fn param_count(&self) -> usize {
        self.n_qubits + 2 * self.n_qubits * self.layers
    }
}

pub fn build_ansatz(cfg: &AnsatzConfig) -> Result<CircuitSpec> {
    let n = cfg.n_qubits;
    let mut circ = CircuitSpec::new(n)?;
    for q in 0..n {
        circ.add_weight(Gate::unbound(GateKind::Ry, q))?;
    }
    for _ in 0..cfg.layers {
        for q in 0..n {
            circ.add_weight(Gate::unbound(GateKind::Ry, q))?;
        }
        for q in 0..n {
            circ.add_weight(Gate::unbound(GateKind::Rz, q))?;
        }
        if n > 1 {
            for q in 0..n {
                circ.add_fixed(Gate::cnot(q, (q + 1) % n))?;
            }
        }
    }
    debug_assert_eq!(circ.weight_count(), cfg.param_count());
    Ok(circ)
}

/// Data embedding: the `S`-entry input is split across the qubits into
/// `d = ceil(S / n)` sequential RY gates per qubit; padded slots stay bound
/// to zero-angle inputs. The whole block can be repeated, re-binding the
/// same data slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub s_len: usize,
    pub n_qubits: usize,
    pub repetitions: usize,
}

impl EmbeddingConfig {
    pub fn depth_per_qubit(&self) -> usize {
        self.s_len.div_ceil(self.n_qubits)
    }

    /// Data slot count including zero padding.
    pub fn padded_len(&self) -> usize {
        self.depth_per_qubit() * self.n_qubits
    }

    /// Pads an `S`-entry angle vector with zeros up to the slot count.
    pub fn pad(&self, angles: &[f64]) -> Result<Vec<f64>> {
        if angles.len() != self.s_len {
            return Err(Error::LengthMismatch { expected: self.s_len, actual: angles.len() });
        }
        let mut padded = angles.to_vec();
        padded.resize(self.padded_len(), 0.0);
        Ok(padded)
    }
}

pub fn build_embedding(cfg: &EmbeddingConfig) -> Result<CircuitSpec> {
    if cfg.repetitions == 0 {
        return Err(Error::Invalid("embedding repetitions must be at least 1".into()));
    }
    if cfg.s_len == 0 {
        return Err(Error::Invalid("embedding input length must be positive".into()));
    }
    let d = cfg.depth_per_qubit();
    let mut circ = CircuitSpec::new(cfg.n_qubits)?;
    for _ in 0..cfg.repetitions {
        for q in 0..cfg.n_qubits {
            for j in 0..d {
                circ.add_data(Gate::unbound(GateKind::Ry, q), q * d + j)?;
            }
        }
    }
    Ok(circ)
}

/// Per-entry affine map fitted on training data so inputs land in [0, 2π].
/// Application clamps, so out-of-range inference inputs stay embeddable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Normalizer {
    pub fn fit(instances: &[Vec<f64>]) -> Result<Self> {
        let first = instances
            .first()
            .ok_or_else(|| Error::Invalid("cannot fit a normalizer on an empty batch".into()))?;
        let s = first.len();
        let mut offsets = vec![f64::INFINITY; s];
        let mut maxima = vec![f64::NEG_INFINITY; s];
        for row in instances {
            if row.len() != s {
                return Err(Error::LengthMismatch { expected: s, actual: row.len() });
            }
            for (k, &x) in row.iter().enumerate() {
                offsets[k] = offsets[k].min(x);
                maxima[k] = maxima[k].max(x);
            }
        }
        let scales = offsets
            .iter()
            .zip(&maxima)
            .map(|(&lo, &hi)| if hi > lo { TWO_PI / (hi - lo) } else { 0.0 })
            .collect();
        Ok(Normalizer { offsets, scales })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn apply(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: b.len() });
        }
        Ok(b.iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(&x, (&off, &sc))| ((x - off) * sc).clamp(0.0, TWO_PI))
            .collect())
    }
}

/// Maps every instance of a batch into embedding angles, returning the
/// fitted normalizer for inference reuse.
pub fn normalize_data(batch: &InstanceBatch) -> Result<(Vec<Vec<f64>>, Normalizer)> {
    let normalizer = Normalizer::fit(&batch.instances)?;
    let normalized = batch
        .instances
        .iter()
        .map(|row| normalizer.apply(row))
        .collect::<Result<Vec<_>>>()?;
    Ok((normalized, normalizer))
}

#[derive(Debug, Clone, Copy)]
pub struct FlatInitOptions {
    pub target_fidelity: f64,
    pub max_iters: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for FlatInitOptions {
    fn default() -> Self {
        FlatInitOptions { target_fidelity: 0.99, max_iters: 5000, step: 0.08, seed: 17 }
    }
}

#[derive(Debug, Clone)]
pub struct FlatInitResult {
    pub theta: Vec<f64>,
    pub fidelity: f64,
    pub iterations: usize,
}

/// Fits ansatz weights so the prepared state matches the flat voltage
/// profile: amplitude `1/sqrt(N)` on the first `N` basis states, zero on the
/// padding. Gradient ascent on the fidelity with parameter-shift partials;
/// reports the best fidelity reached rather than failing.
pub fn fit_flat_init(
    ansatz: &CircuitSpec,
    n_buses: usize,
    opts: &FlatInitOptions,
) -> Result<FlatInitResult> {
    let dim = 1usize << ansatz.n_qubits();
    if n_buses == 0 || n_buses > dim {
        return Err(Error::Invalid(format!(
            "{n_buses} buses do not fit on {} qubits",
            ansatz.n_qubits()
        )));
    }
    if ansatz.data_count() != 0 {
        return Err(Error::Invalid("flat init expects a weight-only ansatz".into()));
    }
    let amp = 1.0 / (n_buses as f64).sqrt();
    let target: Vec<Complex64> = (0..dim)
        .map(|k| Complex64::new(if k < n_buses { amp } else { 0.0 }, 0.0))
        .collect();

    let fidelity = |state: &StateVector| -> f64 {
        let overlap: Complex64 = state
            .amps()
            .iter()
            .zip(&target)
            .map(|(a, t)| t.conj() * a)
            .sum();
        overlap.norm_sqr()
    };

    let p = ansatz.weight_count();
    let mut state = StateVector::zero(ansatz.n_qubits())?;
    let mut best_theta = vec![0.0; p];
    let mut best_fid = f64::NEG_INFINITY;
    let mut iterations = 0;

    // Adam-style ascent on the fidelity; restart from a fresh seed if a
    // basin tops out below the target.
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    'restarts: for restart in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart));
        let spread = 0.1 + 0.2 * restart as f64;
        let mut theta: Vec<f64> = (0..p)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                spread * z
            })
            .collect();
        let mut m = vec![0.0; p];
        let mut v = vec![0.0; p];
        let mut shifted = theta.clone();
        let mut grad = vec![0.0; p];
        let per_restart = (opts.max_iters / 4).max(500);

        for step_idx in 1..=per_restart {
            iterations += 1;
            for k in 0..p {
                shifted.copy_from_slice(&theta);
                shifted[k] = theta[k] + std::f64::consts::FRAC_PI_2;
                ansatz.run_into(&shifted, &[], &mut state)?;
                let plus = fidelity(&state);
                shifted[k] = theta[k] - std::f64::consts::FRAC_PI_2;
                ansatz.run_into(&shifted, &[], &mut state)?;
                let minus = fidelity(&state);
                grad[k] = 0.5 * (plus - minus);
            }
            let bc1 = 1.0 - beta1.powi(step_idx as i32);
            let bc2 = 1.0 - beta2.powi(step_idx as i32);
            for k in 0..p {
                m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                theta[k] += opts.step * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
            }
            ansatz.run_into(&theta, &[], &mut state)?;
            let fid = fidelity(&state);
            if fid > best_fid {
                best_fid = fid;
                best_theta.copy_from_slice(&theta);
            }
            if best_fid >= opts.target_fidelity || iterations >= opts.max_iters {
                break 'restarts;
            }
        }
    }

    Ok(FlatInitResult { theta: best_theta, fidelity: best_fid, iterations })
}

/// Trained model artifact shared between the `train` and `eval` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub ansatz: AnsatzConfig,
    pub embedding: EmbeddingConfig,
    pub normalizer: Normalizer,
    pub theta: Vec<f64>,
    pub alpha: f64,
}

impl VqcModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: VqcModel = serde_json::from_str(text)?;
        if model.theta.len() != model.ansatz.param_count() {
            return Err(Error::LengthMismatch {
                expected: model.ansatz.param_count(),
                actual: model.theta.len(),
            });
        }
        Ok(model)
    }
}
