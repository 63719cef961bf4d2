//! Shared test oracles: dense Kronecker-lifted gate matrices, random state
//! and circuit generators, and independent grid physics formulas. Everything
//! here is built directly from definitions, not through the library's
//! simulation or measurement paths.

#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qpflow::case::{BranchStatus, CaseData};
use qpflow::qsim::{CircuitSpec, Gate, GateKind, ParamSlot, StateVector};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2x2 matrix of a single-qubit gate from its textbook definition.
pub fn gate_2x2(kind: GateKind, angle: Option<f64>) -> Array2<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::X => ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        GateKind::H => ndarray::array![[c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(-r, 0.0)]],
        GateKind::Sdg => ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]],
        GateKind::Rx => {
            let t = angle.unwrap() / 2.0;
            ndarray::array![
                [c(t.cos(), 0.0), c(0.0, -t.sin())],
                [c(0.0, -t.sin()), c(t.cos(), 0.0)]
            ]
        }
        GateKind::Ry => {
            let t = angle.unwrap() / 2.0;
            ndarray::array![
                [c(t.cos(), 0.0), c(-t.sin(), 0.0)],
                [c(t.sin(), 0.0), c(t.cos(), 0.0)]
            ]
        }
        GateKind::Rz => {
            let t = angle.unwrap() / 2.0;
            ndarray::array![
                [Complex64::from_polar(1.0, -t), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::from_polar(1.0, t)]
            ]
        }
        GateKind::Cnot => panic!("CNOT is not a single-qubit gate"),
    }
}

/// Dense 2^n x 2^n unitary of one gate, Kronecker-lifted with qubit 0 as
/// the most significant index bit.
pub fn dense_gate(n_qubits: usize, gate: &Gate, angle: Option<f64>) -> Array2<Complex64> {
    let dim = 1usize << n_qubits;
    let mut u = Array2::from_elem((dim, dim), c(0.0, 0.0));
    match gate.kind {
        GateKind::Cnot => {
            let cmask = 1usize << (n_qubits - 1 - gate.control.unwrap());
            let tmask = 1usize << (n_qubits - 1 - gate.target);
            for k in 0..dim {
                let dst = if k & cmask != 0 { k ^ tmask } else { k };
                u[[dst, k]] = c(1.0, 0.0);
            }
        }
        _ => {
            let m = gate_2x2(gate.kind, angle);
            let qmask = 1usize << (n_qubits - 1 - gate.target);
            for j in 0..dim {
                for k in 0..dim {
                    if (j & !qmask) == (k & !qmask) {
                        let jb = usize::from(j & qmask != 0);
                        let kb = usize::from(k & qmask != 0);
                        u[[j, k]] = m[[jb, kb]];
                    }
                }
            }
        }
    }
    u
}

/// Dense matrix of a whole circuit under a weight/data binding.
pub fn dense_circuit(circ: &CircuitSpec, weights: &[f64], data: &[f64]) -> Array2<Complex64> {
    let dim = 1usize << circ.n_qubits();
    let mut u = Array2::from_elem((dim, dim), c(0.0, 0.0));
    for k in 0..dim {
        u[[k, k]] = c(1.0, 0.0);
    }
    for sg in circ.gates() {
        let angle = match sg.slot {
            ParamSlot::Fixed => sg.gate.param,
            ParamSlot::Weight(k) => Some(weights[k]),
            ParamSlot::Data(k) => Some(data[k]),
        };
        let angle = if sg.gate.is_rotation() { angle } else { None };
        let g = dense_gate(circ.n_qubits(), &sg.gate, angle);
        u = g.dot(&u);
    }
    u
}

/// Dense matrix-vector product as a state.
pub fn apply_dense(u: &Array2<Complex64>, state: &[Complex64]) -> Vec<Complex64> {
    (0..u.nrows())
        .map(|r| (0..u.ncols()).map(|k| u[[r, k]] * state[k]).sum())
        .collect()
}

/// v^H M v computed densely.
pub fn dense_quadratic(m: &Array2<Complex64>, v: &[Complex64]) -> Complex64 {
    let mut acc = c(0.0, 0.0);
    for r in 0..m.nrows() {
        let mut row = c(0.0, 0.0);
        for k in 0..m.ncols() {
            row += m[[r, k]] * v[k];
        }
        acc += v[r].conj() * row;
    }
    acc
}

pub fn random_state(n_qubits: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let dim = 1usize << n_qubits;
    let amps: Vec<Complex64> = (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(re, im)
        })
        .collect();
    StateVector::from_amplitudes_normalized(amps).unwrap()
}

pub fn random_complex_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(re, im)
        })
        .collect()
}

/// Random circuit over the full gate alphabet, all angles fixed.
pub fn random_circuit(n_qubits: usize, depth: usize, rng: &mut ChaCha8Rng) -> CircuitSpec {
    let mut circ = CircuitSpec::new(n_qubits).unwrap();
    for _ in 0..depth {
        let target = rng.random_range(0..n_qubits);
        match rng.random_range(0..7) {
            0 => circ.add_fixed(Gate::rx(target, rng.random_range(-3.2..3.2))).unwrap(),
            1 => circ.add_fixed(Gate::ry(target, rng.random_range(-3.2..3.2))).unwrap(),
            2 => circ.add_fixed(Gate::rz(target, rng.random_range(-3.2..3.2))).unwrap(),
            3 => circ.add_fixed(Gate::x(target)).unwrap(),
            4 => circ.add_fixed(Gate::h(target)).unwrap(),
            5 => circ.add_fixed(Gate::sdg(target)).unwrap(),
            _ => {
                if n_qubits > 1 {
                    let mut control = rng.random_range(0..n_qubits);
                    if control == target {
                        control = (control + 1) % n_qubits;
                    }
                    circ.add_fixed(Gate::cnot(control, target)).unwrap();
                } else {
                    circ.add_fixed(Gate::x(target)).unwrap();
                }
            }
        }
    }
    circ
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const CASE14: &str = include_str!("../../data/case14.m");

/// Independent Π-model Y-bus assembly, written directly from the branch
/// stamp formulas with explicit real/imaginary arithmetic.
pub fn ybus_oracle(case: &CaseData) -> Array2<Complex64> {
    let n = case.n_buses();
    let mut y = Array2::from_elem((n, n), c(0.0, 0.0));
    for br in &case.branches {
        if br.status == BranchStatus::Off {
            continue;
        }
        let f = case.bus_index(br.from_bus).unwrap();
        let t = case.bus_index(br.to_bus).unwrap();
        let denom = br.r * br.r + br.x * br.x;
        let g = br.r / denom;
        let b = -br.x / denom;
        let series = c(g, b);
        let half_charge = c(0.0, br.b_charge / 2.0);
        let tau = br.tap;
        let tap_fwd = Complex64::from_polar(tau, br.shift);
        y[[f, f]] += (series + half_charge) / c(tau * tau, 0.0);
        y[[t, t]] += series + half_charge;
        y[[f, t]] += -series / tap_fwd.conj();
        y[[t, f]] += -series / tap_fwd;
    }
    for (idx, bus) in case.buses.iter().enumerate() {
        y[[idx, idx]] += c(bus.shunt_gs, bus.shunt_bs);
    }
    y
}

/// Scalar injection formulas straight from the power-flow definition:
/// S_n = v_n (Σ_m Y[n][m] v_m)*.
pub fn injection_oracle(y: &Array2<Complex64>, v: &[Complex64], n: usize) -> (f64, f64) {
    let current: Complex64 = (0..y.ncols()).map(|m| y[[n, m]] * v[m]).sum();
    let s = v[n] * current.conj();
    (s.re, s.im)
}
