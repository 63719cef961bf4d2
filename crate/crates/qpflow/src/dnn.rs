//! Classical baseline: a small fully connected network mapping normalized
//! specification vectors to complex voltages, trained unsupervised on the
//! same physics residual Σ_t Σ_s (v̂ᵀH_s v̂ - b_t^s)² by exact analytic
//! backpropagation through the quadratic forms.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{nmae, SpecSet};
use crate::solver::{TraceRecord, TrainConfig, TrainTrace};
use crate::vqc::Normalizer;

/// Rectifier hidden layers, linear output split into real and imaginary
/// voltage halves (padded entries simply stay unused by the quadratics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl MlpConfig {
    /// The comparison architecture: two hidden layers of 10, output 2·N_pad.
    pub fn for_specs(specs: &SpecSet) -> Self {
        MlpConfig {
            input_dim: specs.n_specs(),
            hidden: vec![10, 10],
            output_dim: 2 * specs.padded_dim(),
        }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((h, prev));
            prev = h;
        }
        dims.push((self.output_dim, prev));
        dims
    }

    /// Total number of weights and biases.
    pub fn weight_count(&self) -> usize {
        self.layer_dims().iter().map(|(o, i)| o * i + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Invalid("all layer widths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpWeights {
    /// Uniform init scaled by layer fan-in, deterministic per seed.
    pub fn init(cfg: &MlpConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (out, inp) in cfg.layer_dims() {
            let bound = 1.0 / (inp as f64).sqrt();
            let w = Array2::from_shape_fn((out, inp), |_| rng.random_range(-bound..bound));
            weights.push(w);
            biases.push(Array1::zeros(out));
        }
        Ok(MlpWeights { weights, biases })
    }

    pub fn zeros(cfg: &MlpConfig) -> Result<Self> {
        cfg.validate()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (out, inp) in cfg.layer_dims() {
            weights.push(Array2::zeros((out, inp)));
            biases.push(Array1::zeros(out));
        }
        Ok(MlpWeights { weights, biases })
    }

    pub fn count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_shapes(&self, cfg: &MlpConfig) -> Result<()> {
        let dims = cfg.layer_dims();
        if self.weights.len() != dims.len() || self.biases.len() != dims.len() {
            return Err(Error::LengthMismatch { expected: dims.len(), actual: self.weights.len() });
        }
        for ((w, b), (out, inp)) in self.weights.iter().zip(&self.biases).zip(&dims) {
            if w.nrows() != *out || w.ncols() != *inp || b.len() != *out {
                return Err(Error::Invalid("weight shapes inconsistent with config".into()));
            }
        }
        Ok(())
    }
}

struct ForwardPass {
    /// Pre-activations per layer.
    zs: Vec<Array1<f64>>,
    /// Post-activations per layer (last is the linear output).
    activations: Vec<Array1<f64>>,
}

fn forward_trace(cfg: &MlpConfig, weights: &MlpWeights, input: &[f64]) -> Result<ForwardPass> {
    if input.len() != cfg.input_dim {
        return Err(Error::LengthMismatch { expected: cfg.input_dim, actual: input.len() });
    }
    weights.check_shapes(cfg)?;
    let n_layers = weights.weights.len();
    let mut zs = Vec::with_capacity(n_layers);
    let mut activations = Vec::with_capacity(n_layers);
    let mut a = Array1::from_vec(input.to_vec());
    for (l, (w, bias)) in weights.weights.iter().zip(&weights.biases).enumerate() {
        let z = w.dot(&a) + bias;
        a = if l + 1 < n_layers { z.mapv(|v| v.max(0.0)) } else { z.clone() };
        zs.push(z);
        activations.push(a.clone());
    }
    Ok(ForwardPass { zs, activations })
}

/// Network output folded into a complex voltage vector of length `N_pad`.
pub fn forward(cfg: &MlpConfig, weights: &MlpWeights, input: &[f64]) -> Result<Vec<Complex64>> {
    let pass = forward_trace(cfg, weights, input)?;
    Ok(fold_voltage(pass.activations.last().expect("at least one layer")))
}

fn fold_voltage(output: &Array1<f64>) -> Vec<Complex64> {
    let half = output.len() / 2;
    (0..half)
        .map(|k| Complex64::new(output[k], output[half + k]))
        .collect()
}

/// Physics loss Σ_s (v̂ᴴ H_s v̂ - b_s)² and its gradient with respect to the
/// network output vector [Re v̂; Im v̂].
fn physics_loss_and_output_grad(
    specs: &SpecSet,
    v_hat: &[Complex64],
    b: &[f64],
) -> (f64, Array1<f64>) {
    let np = v_hat.len();
    let mut grad = Array1::zeros(2 * np);
    let mut loss = 0.0;
    for (h, &b_s) in specs.h.iter().zip(b) {
        // w = H v̂; value = v̂ᴴ w; d value/d Re v_k = 2 Re w_k, d/d Im v_k = 2 Im w_k
        let mut value = Complex64::new(0.0, 0.0);
        let mut w = vec![Complex64::new(0.0, 0.0); np];
        for r in 0..np {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..np {
                acc += h[[r, c]] * v_hat[c];
            }
            w[r] = acc;
            value += v_hat[r].conj() * acc;
        }
        let residual = value.re - b_s;
        loss += residual * residual;
        for k in 0..np {
            grad[k] += 2.0 * residual * 2.0 * w[k].re;
            grad[np + k] += 2.0 * residual * 2.0 * w[k].im;
        }
    }
    (loss, grad)
}

struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

fn backprop(
    cfg: &MlpConfig,
    weights: &MlpWeights,
    input: &[f64],
    pass: &ForwardPass,
    output_grad: Array1<f64>,
) -> Gradients {
    let n_layers = weights.weights.len();
    let mut g_w: Vec<Array2<f64>> = weights.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut g_b: Vec<Array1<f64>> = weights.biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let input = Array1::from_vec(input.to_vec());
    let _ = cfg;

    let mut delta = output_grad; // dL/dz for the linear output layer
    for l in (0..n_layers).rev() {
        let upstream = if l == 0 { &input } else { &pass.activations[l - 1] };
        for r in 0..delta.len() {
            let d = delta[r];
            if d != 0.0 {
                for c in 0..upstream.len() {
                    g_w[l][[r, c]] += d * upstream[c];
                }
            }
            g_b[l][r] += d;
        }
        if l > 0 {
            let mut next = weights.weights[l].t().dot(&delta);
            for (v, z) in next.iter_mut().zip(&pass.zs[l - 1]) {
                if *z <= 0.0 {
                    *v = 0.0;
                }
            }
            delta = next;
        }
    }
    Gradients { weights: g_w, biases: g_b }
}

/// Loss and full parameter gradient for one instance (test hook for the
/// finite-difference oracle).
pub fn loss_and_gradient(
    cfg: &MlpConfig,
    weights: &MlpWeights,
    specs: &SpecSet,
    input: &[f64],
    b: &[f64],
) -> Result<(f64, MlpWeights)> {
    let pass = forward_trace(cfg, weights, input)?;
    let v_hat = fold_voltage(pass.activations.last().expect("layers"));
    let (loss, output_grad) = physics_loss_and_output_grad(specs, &v_hat, b);
    let grads = backprop(cfg, weights, input, &pass, output_grad);
    Ok((loss, MlpWeights { weights: grads.weights, biases: grads.biases }))
}

/// Gradient descent with the 0.9999-style exponential step decay on the
/// batch-averaged physics loss. Aborts with a diagnostic if the objective
/// explodes past 10³ times its initial value.
pub fn train_dnn(
    cfg: &MlpConfig,
    specs: &SpecSet,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    tcfg: &TrainConfig,
) -> Result<(MlpWeights, TrainTrace)> {
    tcfg.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::LengthMismatch { expected: inputs.len(), actual: targets.len() });
    }
    let mut weights = MlpWeights::init(cfg, tcfg.seed)?;
    let mut mu = tcfg.mu_theta;
    let mut trace = TrainTrace::default();
    let t_total = inputs.len();
    let mut divergence_bar = f64::INFINITY;

    for iter in 0..=tcfg.max_iters {
        let mut loss = 0.0;
        let mut nm = 0.0;
        let mut g_acc: Option<MlpWeights> = None;
        for (input, b) in inputs.iter().zip(targets) {
            let (l, g) = loss_and_gradient(cfg, &weights, specs, input, b)?;
            loss += l;
            let v_hat = forward(cfg, &weights, input)?;
            let b_hat = specs.evaluate(&v_hat)?;
            nm += nmae(&b_hat, b)?;
            match &mut g_acc {
                None => g_acc = Some(g),
                Some(acc) => {
                    for (aw, gw) in acc.weights.iter_mut().zip(&g.weights) {
                        *aw += gw;
                    }
                    for (ab, gb) in acc.biases.iter_mut().zip(&g.biases) {
                        *ab += gb;
                    }
                }
            }
        }
        let inv = 1.0 / t_total as f64;
        loss *= inv;
        nm *= inv;
        let grads = g_acc.expect("nonempty batch");
        let gnorm = {
            let mut acc = 0.0;
            for w in &grads.weights {
                acc += w.iter().map(|x| x * x).sum::<f64>();
            }
            for b in &grads.biases {
                acc += b.iter().map(|x| x * x).sum::<f64>();
            }
            (acc * inv * inv).sqrt()
        };

        if iter == 0 {
            divergence_bar = 1e3 * loss.max(1e-9);
        }
        if !loss.is_finite() || loss > divergence_bar {
            return Err(Error::Diverged { iter, objective: loss });
        }

        let stop = iter == tcfg.max_iters || gnorm < tcfg.grad_tol;
        if iter % tcfg.trace_stride == 0 || stop {
            trace.records.push(TraceRecord {
                iter,
                objective: loss,
                nmae: nm,
                grad_norm: gnorm,
                alpha: 0.0,
            });
        }
        if stop {
            break;
        }

        for (w, g) in weights.weights.iter_mut().zip(&grads.weights) {
            w.zip_mut_with(g, |wv, gv| *wv -= mu * inv * gv);
        }
        for (b, g) in weights.biases.iter_mut().zip(&grads.biases) {
            b.zip_mut_with(g, |bv, gv| *bv -= mu * inv * gv);
        }
        mu *= tcfg.decay;
    }

    Ok((weights, trace))
}

/// Per-instance NMAE of the trained network through the quadratic forms.
pub fn evaluate_dnn(
    cfg: &MlpConfig,
    weights: &MlpWeights,
    normalizer: &Normalizer,
    specs: &SpecSet,
    instances: &[Vec<f64>],
) -> Result<Vec<f64>> {
    instances
        .iter()
        .map(|b| {
            let input = normalizer.apply(b)?;
            let v_hat = forward(cfg, weights, &input)?;
            let b_hat = specs.evaluate(&v_hat)?;
            nmae(&b_hat, b)
        })
        .collect()
}

/// Serialized baseline artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnModel {
    pub cfg: MlpConfig,
    pub weights: MlpWeights,
    pub normalizer: Normalizer,
}

impl DnnModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DnnModel = serde_json::from_str(text)?;
        model.weights.check_shapes(&model.cfg)?;
        Ok(model)
    }
}
