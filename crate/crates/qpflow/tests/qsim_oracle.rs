//! Simulator checks against dense Kronecker-lifted matrices.

mod common;

use common::*;
use ndarray::Array2;
use num_complex::Complex64;
use qpflow::qsim::{CircuitSpec, Gate, GateKind, StateVector};
use rand::Rng;

fn max_abs(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn every_lifted_gate_is_unitary() {
    let n = 3;
    let dim = 1 << n;
    let mut gates = vec![
        Gate::x(1),
        Gate::h(0),
        Gate::sdg(2),
        Gate::rx(0, 0.7),
        Gate::ry(1, -1.3),
        Gate::rz(2, 2.9),
        Gate::cnot(0, 2),
        Gate::cnot(2, 1),
    ];
    for angle in [-3.0, -0.5, 0.0, 1.2] {
        gates.push(Gate::rx(1, angle));
        gates.push(Gate::ry(2, angle));
        gates.push(Gate::rz(0, angle));
    }
    for gate in gates {
        let angle = gate.param;
        let u = dense_gate(n, &gate, angle);
        let uh_u = u.t().mapv(|v| v.conj()).dot(&u);
        let mut identity = Array2::from_elem((dim, dim), c(0.0, 0.0));
        for k in 0..dim {
            identity[[k, k]] = c(1.0, 0.0);
        }
        assert!(
            max_abs(&(&uh_u - &identity)) < 1e-12,
            "gate {:?} not unitary",
            gate.kind
        );
    }
}

#[test]
fn random_circuits_match_dense_matrix_product() {
    let mut rng = seeded(101);
    for trial in 0..100 {
        let n = rng.random_range(1..=4usize);
        let depth = rng.random_range(1..=40usize);
        let circ = random_circuit(n, depth, &mut rng);
        let state = circ.run(&[], &[]).unwrap();
        let u = dense_circuit(&circ, &[], &[]);
        let mut zero = vec![c(0.0, 0.0); 1 << n];
        zero[0] = c(1.0, 0.0);
        let expected = apply_dense(&u, &zero);
        let max_err = state
            .amps()
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-10, "trial {trial}: deviation {max_err}");
        assert!((state.norm() - 1.0).abs() < 1e-10, "trial {trial}: norm drift");
    }
}

#[test]
fn norm_preserved_across_long_random_evolutions() {
    let mut rng = seeded(77);
    for _ in 0..20 {
        let n = rng.random_range(1..=5usize);
        let mut state = random_state(n, &mut rng);
        let circ = random_circuit(n, 60, &mut rng);
        for sg in circ.gates() {
            state.apply_in_place(&sg.gate, None).unwrap();
        }
        assert!((state.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn kron_pmf_is_product_of_marginals() {
    let mut rng = seeded(13);
    for _ in 0..10 {
        let a = random_state(2, &mut rng);
        let b = random_state(3, &mut rng);
        let joint = a.kron(&b).unwrap();
        let pa = a.probabilities();
        let pb = b.probabilities();
        let pj = joint.probabilities();
        for (k, pk) in pj.iter().enumerate() {
            let expect = pa[k >> 3] * pb[k & 7];
            assert!((pk - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn quantum_nature_of_sampling_matches_pmf() {
    // frequency check on a 2-qubit superposition at 10^5 shots
    let state = StateVector::zero(2)
        .unwrap()
        .apply_gate(&Gate::h(0), None)
        .unwrap()
        .apply_gate(&Gate::ry(1, 1.1), None)
        .unwrap();
    let probs = state.probabilities();
    let mut rng = seeded(5);
    let shots = 100_000;
    let indices = state.sample_indices(shots, &mut rng);
    let mut counts = [0usize; 4];
    for k in indices {
        counts[k] += 1;
    }
    for (k, &cnt) in counts.iter().enumerate() {
        let freq = cnt as f64 / shots as f64;
        let se = (probs[k] * (1.0 - probs[k]) / shots as f64).sqrt();
        assert!(
            (freq - probs[k]).abs() < 5.0 * se + 1e-9,
            "basis {k}: freq {freq} vs p {}",
            probs[k]
        );
    }
}

#[test]
fn sampled_expectation_converges_to_exact() {
    let mut rng = seeded(23);
    let state = random_state(3, &mut rng);
    let diag: Vec<f64> = (0..8).map(|k| (k as f64) - 3.5).collect();
    let exact = state.expectation(&diag).unwrap();
    let mut errors = Vec::new();
    for shots in [100usize, 10_000, 1_000_000] {
        let est = state.sampled_expectation(&diag, shots, 900).unwrap();
        errors.push((est - exact).abs());
    }
    // Monte-Carlo error shrinks with the shot budget
    assert!(errors[2] < errors[0]);
    assert!(errors[2] < 0.05);
}

#[test]
fn circuit_spec_weight_slots_stay_unique_and_ordered() {
    let mut circ = CircuitSpec::new(2).unwrap();
    let k0 = circ.add_weight(Gate::unbound(GateKind::Ry, 0)).unwrap();
    let k1 = circ.add_weight(Gate::unbound(GateKind::Rz, 1)).unwrap();
    assert_eq!((k0, k1), (0, 1));
    assert_eq!(circ.weight_count(), 2);
    let state = circ.run(&[0.4, -0.2], &[]).unwrap();
    let u = dense_circuit(&circ, &[0.4, -0.2], &[]);
    let mut zero = vec![c(0.0, 0.0); 4];
    zero[0] = c(1.0, 0.0);
    let expected = apply_dense(&u, &zero);
    for (a, b) in state.amps().iter().zip(&expected) {
        assert!((a - b).norm() < 1e-12);
    }
}
