//! Baseline network checks: an independent forward-pass reference, the
//! finite-difference gradient oracle, and physics-evaluation plumbing.

mod common;

use common::*;
use ndarray::{Array1, Array2};
use qpflow::case::parse_case;
use qpflow::dnn::{
    evaluate_dnn, forward, loss_and_gradient, train_dnn, MlpConfig, MlpWeights,
};
use qpflow::grid::{build_specs, build_ybus, flat_start, solve_newton_raphson, SpecSet};
use qpflow::solver::TrainConfig;
use qpflow::vqc::Normalizer;
use rand::Rng;

fn case14_specs() -> SpecSet {
    let case = parse_case(CASE14).unwrap();
    build_specs(&case, &build_ybus(&case))
}

/// Independent reference forward pass, written with plain loops.
fn reference_forward(
    weights: &[Array2<f64>],
    biases: &[Array1<f64>],
    input: &[f64],
) -> Vec<num_complex::Complex64> {
    let mut a: Vec<f64> = input.to_vec();
    for l in 0..weights.len() {
        let w = &weights[l];
        let mut z = vec![0.0; w.nrows()];
        for r in 0..w.nrows() {
            let mut acc = biases[l][r];
            for (col, &av) in a.iter().enumerate() {
                acc += w[[r, col]] * av;
            }
            z[r] = acc;
        }
        if l + 1 < weights.len() {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        a = z;
    }
    let half = a.len() / 2;
    (0..half)
        .map(|k| num_complex::Complex64::new(a[k], a[half + k]))
        .collect()
}

#[test]
fn forward_matches_reference_implementation() {
    let specs = case14_specs();
    let cfg = MlpConfig::for_specs(&specs);
    let mut rng = seeded(12);
    for trial in 0..20 {
        let weights = MlpWeights::init(&cfg, trial).unwrap();
        let input: Vec<f64> = (0..cfg.input_dim).map(|_| rng.random_range(-2.0..6.5)).collect();
        let ours = forward(&cfg, &weights, &input).unwrap();
        let reference = reference_forward(&weights.weights, &weights.biases, &input);
        assert_eq!(ours.len(), 16);
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn default_architecture_weight_count_reported() {
    let specs = case14_specs();
    let cfg = MlpConfig::for_specs(&specs);
    // 27 -> 10 -> 10 -> 32 with biases; the count is deterministic
    assert_eq!(cfg.weight_count(), 27 * 10 + 10 + 10 * 10 + 10 + 10 * 32 + 32);
    assert_eq!(cfg.weight_count(), 742);
}

#[test]
fn backprop_matches_finite_differences() {
    let specs = case14_specs();
    let cfg = MlpConfig { input_dim: 27, hidden: vec![6, 5], output_dim: 32 };
    let mut rng = seeded(314);
    let h = 1e-6;
    for trial in 0..3 {
        let weights = MlpWeights::init(&cfg, 100 + trial).unwrap();
        let input: Vec<f64> =
            (0..cfg.input_dim).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let b = &specs.b;
        let (_, grads) = loss_and_gradient(&cfg, &weights, &specs, &input, b).unwrap();
        let mut max_err = 0.0f64;
        for l in 0..weights.weights.len() {
            for r in 0..weights.weights[l].nrows() {
                for c in 0..weights.weights[l].ncols() {
                    let mut wp = weights.clone();
                    wp.weights[l][[r, c]] += h;
                    let mut wm = weights.clone();
                    wm.weights[l][[r, c]] -= h;
                    let lp = loss_and_gradient(&cfg, &wp, &specs, &input, b).unwrap().0;
                    let lm = loss_and_gradient(&cfg, &wm, &specs, &input, b).unwrap().0;
                    let fd = (lp - lm) / (2.0 * h);
                    max_err = max_err.max((grads.weights[l][[r, c]] - fd).abs());
                }
            }
            for r in 0..weights.biases[l].len() {
                let mut wp = weights.clone();
                wp.biases[l][r] += h;
                let mut wm = weights.clone();
                wm.biases[l][r] -= h;
                let lp = loss_and_gradient(&cfg, &wp, &specs, &input, b).unwrap().0;
                let lm = loss_and_gradient(&cfg, &wm, &specs, &input, b).unwrap().0;
                let fd = (lp - lm) / (2.0 * h);
                max_err = max_err.max((grads.biases[l][r] - fd).abs());
            }
        }
        assert!(max_err < 1e-5, "trial {trial}: max gradient deviation {max_err}");
    }
}

#[test]
fn exact_nr_voltage_has_negligible_nmae() {
    // bypass the network: the solved voltage pushed through the quadratics
    // reproduces its own specification vector
    let specs = case14_specs();
    let sol = solve_newton_raphson(&specs, &specs.b, &flat_start(14)).unwrap();
    assert!(sol.converged);
    let b_hat = specs.evaluate(&sol.v).unwrap();
    let err = qpflow::grid::nmae(&b_hat, &specs.b).unwrap();
    assert!(err < 1e-8, "NMAE {err}");
}

#[test]
fn single_instance_training_reaches_low_nmae() {
    // long training on one instance approaches the single-instance fit
    let specs = case14_specs();
    let cfg = MlpConfig::for_specs(&specs);
    let batch = qpflow::grid::sample_instances(&specs, 16, 4, 0.05, 0.2);
    let normalizer = Normalizer::fit(&batch.instances).unwrap();
    let inputs = vec![normalizer.apply(&specs.b).unwrap()];
    let targets = vec![specs.b.clone()];
    let tcfg = TrainConfig {
        mu_theta: 3e-3,
        decay: 1.0,
        max_iters: 20_000,
        grad_tol: 1e-9,
        trace_stride: 1000,
        ..TrainConfig::single_instance(14)
    };
    let (weights, trace) = train_dnn(&cfg, &specs, &inputs, &targets, &tcfg).unwrap();
    let final_nmae = trace.last().unwrap().nmae;
    assert!(
        final_nmae < 0.05,
        "single-instance DNN fit stalled at NMAE {final_nmae}"
    );
    let nmaes = evaluate_dnn(&cfg, &weights, &normalizer, &specs, &[specs.b.clone()]).unwrap();
    assert!((nmaes[0] - final_nmae).abs() < 0.02);
}
