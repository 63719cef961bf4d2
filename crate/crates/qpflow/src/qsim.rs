//! Exact statevector simulation.
//!
//! States are unit-norm complex amplitude vectors over `2^n` basis states.
//! Qubit 0 is the most significant bit of the basis index, so for `n = 2`
//! the amplitude order is |00⟩, |01⟩, |10⟩, |11⟩ with qubit 0 leftmost.
//! Rotation gates use the half-angle convention `R_P(θ) = exp(-i θ P / 2)`,
//! under which the parameter shift rule `∂F/∂θ = (F(θ+π/2) - F(θ-π/2))/2`
//! is exact.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale limit: joint two-replica states stay within 2^12 amplitudes.
pub const MAX_QUBITS: usize = 12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    X,
    H,
    Sdg,
    Cnot,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::X => "X",
            GateKind::H => "H",
            GateKind::Sdg => "SDG",
            GateKind::Cnot => "CNOT",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }
}

/// A single gate. `param` carries the fixed rotation angle when the gate is
/// not bound to an external parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub param: Option<f64>,
}

impl Gate {
    pub fn rx(target: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rx, target, control: None, param: Some(angle) }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Ry, target, control: None, param: Some(angle) }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rz, target, control: None, param: Some(angle) }
    }

    /// Rotation gate whose angle comes from a circuit parameter slot.
    pub fn unbound(kind: GateKind, target: usize) -> Self {
        Gate { kind, target, control: None, param: None }
    }

    pub fn x(target: usize) -> Self {
        Gate { kind: GateKind::X, target, control: None, param: None }
    }

    pub fn h(target: usize) -> Self {
        Gate { kind: GateKind::H, target, control: None, param: None }
    }

    pub fn sdg(target: usize) -> Self {
        Gate { kind: GateKind::Sdg, target, control: None, param: None }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::Cnot, target, control: Some(control), param: None }
    }

    pub fn is_rotation(&self) -> bool {
        self.kind.is_rotation()
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::QubitIndexOutOfRange { index: self.target, n_qubits });
        }
        match (self.kind, self.control) {
            (GateKind::Cnot, Some(c)) => {
                if c >= n_qubits {
                    return Err(Error::QubitIndexOutOfRange { index: c, n_qubits });
                }
                if c == self.target {
                    return Err(Error::ControlEqualsTarget(c));
                }
            }
            (GateKind::Cnot, None) => {
                return Err(Error::Invalid("CNOT requires a control qubit".into()));
            }
            (_, Some(_)) => {
                return Err(Error::Invalid(format!(
                    "{} does not take a control qubit",
                    self.kind.name()
                )));
            }
            (_, None) => {}
        }
        Ok(())
    }

    /// 2x2 matrix of a single-qubit gate, row major.
    fn single_matrix(&self, angle: Option<f64>) -> Result<[Complex64; 4]> {
        let c0 = Complex64::new(0.0, 0.0);
        let c1 = Complex64::new(1.0, 0.0);
        match self.kind {
            GateKind::X => Ok([c0, c1, c1, c0]),
            GateKind::H => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                Ok([h, h, h, -h])
            }
            GateKind::Sdg => Ok([c1, c0, c0, Complex64::new(0.0, -1.0)]),
            GateKind::Rx => {
                let t = self.angle(angle)? / 2.0;
                let (s, c) = t.sin_cos();
                let mis = Complex64::new(0.0, -s);
                Ok([Complex64::new(c, 0.0), mis, mis, Complex64::new(c, 0.0)])
            }
            GateKind::Ry => {
                let t = self.angle(angle)? / 2.0;
                let (s, c) = t.sin_cos();
                Ok([
                    Complex64::new(c, 0.0),
                    Complex64::new(-s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(c, 0.0),
                ])
            }
            GateKind::Rz => {
                let t = self.angle(angle)? / 2.0;
                Ok([
                    Complex64::from_polar(1.0, -t),
                    c0,
                    c0,
                    Complex64::from_polar(1.0, t),
                ])
            }
            GateKind::Cnot => Err(Error::Invalid("CNOT is not a single-qubit gate".into())),
        }
    }

    fn angle(&self, supplied: Option<f64>) -> Result<f64> {
        if !self.is_rotation() {
            return if supplied.is_some() {
                Err(Error::UnexpectedRotationAngle(self.kind.name()))
            } else {
                Ok(0.0)
            };
        }
        supplied
            .or(self.param)
            .ok_or(Error::MissingRotationAngle(self.kind.name()))
    }
}

/// Unit-norm amplitude vector over `2^n_qubits` basis states.
#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

impl StateVector {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCountOutOfRange(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps, n_qubits })
    }

    /// Wraps amplitudes that are already unit norm (within 1e-8).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(norm));
        }
        Self::from_amplitudes_normalized(amps)
    }

    /// Wraps arbitrary nonzero amplitudes, rescaling to unit norm.
    pub fn from_amplitudes_normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len < 2 || len > (1 << MAX_QUBITS) {
            return Err(Error::QubitCountOutOfRange(len.max(1).trailing_zeros() as usize));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        if (norm - 1.0).abs() > 1e-12 {
            for a in &mut amps {
                *a /= norm;
            }
        }
        Ok(StateVector { amps, n_qubits: len.trailing_zeros() as usize })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Overwrites this state's amplitudes from another of the same size.
    pub fn copy_from(&mut self, other: &StateVector) {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        self.amps.copy_from_slice(&other.amps);
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Measurement PMF |amps_k|^2.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨other|self⟩.
    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| b.conj() * a)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Applies a gate, returning the new state.
    pub fn apply_gate(&self, gate: &Gate, value: Option<f64>) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_in_place(gate, value)?;
        Ok(out)
    }

    /// In-place gate application on the target qubit's amplitude pairs.
    pub fn apply_in_place(&mut self, gate: &Gate, value: Option<f64>) -> Result<()> {
        gate.check(self.n_qubits)?;
        if !gate.is_rotation() && value.is_some() {
            return Err(Error::UnexpectedRotationAngle(gate.kind.name()));
        }
        match gate.kind {
            GateKind::Cnot => {
                let control = gate.control.expect("checked");
                apply_cnot(&mut self.amps, self.n_qubits, control, gate.target);
            }
            _ => {
                let m = gate.single_matrix(value)?;
                apply_single(&mut self.amps, self.n_qubits, gate.target, &m);
            }
        }
        Ok(())
    }

    /// Kronecker product |self⟩ ⊗ |other⟩.
    pub fn kron(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::SizeOverflow);
        }
        let mut amps = Vec::with_capacity(self.len() * other.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { amps, n_qubits: n })
    }

    /// Exact expectation of a diagonal observable: Σ_k |amps_k|^2 diag_k.
    pub fn expectation(&self, diag: &[f64]) -> Result<f64> {
        if diag.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: diag.len() });
        }
        Ok(self
            .amps
            .iter()
            .zip(diag)
            .map(|(a, d)| a.norm_sqr() * d)
            .sum())
    }

    /// Shot-based estimate of the same expectation; deterministic per seed.
    pub fn sampled_expectation(&self, diag: &[f64], shots: usize, seed: u64) -> Result<f64> {
        if diag.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: diag.len() });
        }
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices = self.sample_indices(shots, &mut rng);
        let sum: f64 = indices.iter().map(|&k| diag[k]).sum();
        Ok(sum / shots as f64)
    }

    /// Draws basis-state indices from the measurement PMF.
    pub fn sample_indices(&self, shots: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        (0..shots)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c < u).min(self.len() - 1)
            })
            .collect()
    }

    /// Debug dump: one `index,re,im` row per amplitude.
    pub fn write_amplitudes_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,re,im")?;
        for (k, a) in self.amps.iter().enumerate() {
            writeln!(w, "{},{},{}", k, a.re, a.im)?;
        }
        Ok(())
    }
}

/// |0…0⟩ convenience wrapper.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

fn apply_single(amps: &mut [Complex64], n_qubits: usize, qubit: usize, m: &[Complex64; 4]) {
    let mask = 1usize << (n_qubits - 1 - qubit);
    let len = amps.len();
    let mut base = 0;
    while base < len {
        for k0 in base..base + mask {
            let k1 = k0 | mask;
            let a = amps[k0];
            let b = amps[k1];
            amps[k0] = m[0] * a + m[1] * b;
            amps[k1] = m[2] * a + m[3] * b;
        }
        base += mask << 1;
    }
}

fn apply_cnot(amps: &mut [Complex64], n_qubits: usize, control: usize, target: usize) {
    let cmask = 1usize << (n_qubits - 1 - control);
    let tmask = 1usize << (n_qubits - 1 - target);
    for k in 0..amps.len() {
        if k & cmask != 0 && k & tmask == 0 {
            amps.swap(k, k | tmask);
        }
    }
}

/// How a gate's rotation angle is bound at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamSlot {
    Fixed,
    Weight(usize),
    Data(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlottedGate {
    pub gate: Gate,
    pub slot: ParamSlot,
}

/// An ordered gate list with symbolic weight/data parameter slots.
///
/// Weight slots are unique and contiguous (one trainable angle per slot);
/// data slots are contiguous but may be re-bound by several gates, which is
/// how repeated data-embedding blocks share the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    n_qubits: usize,
    gates: Vec<SlottedGate>,
    weight_count: usize,
    data_count: usize,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCountOutOfRange(n_qubits));
        }
        Ok(CircuitSpec { n_qubits, gates: Vec::new(), weight_count: 0, data_count: 0 })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[SlottedGate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn weight_count(&self) -> usize {
        self.weight_count
    }

    pub fn data_count(&self) -> usize {
        self.data_count
    }

    pub fn add_fixed(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.n_qubits)?;
        if gate.is_rotation() && gate.param.is_none() {
            return Err(Error::MissingRotationAngle(gate.kind.name()));
        }
        self.gates.push(SlottedGate { gate, slot: ParamSlot::Fixed });
        Ok(())
    }

    /// Appends a rotation bound to the next weight slot, returning its index.
    pub fn add_weight(&mut self, gate: Gate) -> Result<usize> {
        gate.check(self.n_qubits)?;
        if !gate.is_rotation() {
            return Err(Error::Invalid(format!(
                "{} cannot carry a weight slot",
                gate.kind.name()
            )));
        }
        let slot = self.weight_count;
        self.weight_count += 1;
        self.gates.push(SlottedGate { gate, slot: ParamSlot::Weight(slot) });
        Ok(slot)
    }

    /// Appends a rotation bound to data slot `index`. New indices must extend
    /// the contiguous range; existing indices re-bind the same input.
    pub fn add_data(&mut self, gate: Gate, index: usize) -> Result<()> {
        gate.check(self.n_qubits)?;
        if !gate.is_rotation() {
            return Err(Error::Invalid(format!(
                "{} cannot carry a data slot",
                gate.kind.name()
            )));
        }
        if index > self.data_count {
            return Err(Error::NonContiguousSlot(index));
        }
        if index == self.data_count {
            self.data_count += 1;
        }
        self.gates.push(SlottedGate { gate, slot: ParamSlot::Data(index) });
        Ok(())
    }

    /// Concatenation `self` then `other` on the same qubit count. Weight and
    /// data slots of `other` are offset past the ones already present.
    pub fn chain(&self, other: &CircuitSpec) -> Result<CircuitSpec> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::LengthMismatch {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        let mut out = self.clone();
        for sg in &other.gates {
            let slot = match sg.slot {
                ParamSlot::Fixed => ParamSlot::Fixed,
                ParamSlot::Weight(k) => ParamSlot::Weight(k + self.weight_count),
                ParamSlot::Data(k) => ParamSlot::Data(k + self.data_count),
            };
            out.gates.push(SlottedGate { gate: sg.gate, slot });
        }
        out.weight_count += other.weight_count;
        out.data_count += other.data_count;
        Ok(out)
    }

    /// Resolves every gate's angle for a given binding. Fixed and data
    /// angles are concrete; weights stay symbolic (`None` marks weight gates
    /// when `weights` is empty and `symbolic_weights` is requested).
    pub fn resolve_angles(&self, weights: &[f64], data: &[f64]) -> Result<Vec<Option<f64>>> {
        if weights.len() != self.weight_count {
            return Err(Error::LengthMismatch {
                expected: self.weight_count,
                actual: weights.len(),
            });
        }
        if data.len() != self.data_count {
            return Err(Error::LengthMismatch { expected: self.data_count, actual: data.len() });
        }
        Ok(self
            .gates
            .iter()
            .map(|sg| match sg.slot {
                ParamSlot::Fixed => sg.gate.param,
                ParamSlot::Weight(k) => Some(weights[k]),
                ParamSlot::Data(k) => Some(data[k]),
            })
            .collect())
    }

    /// Runs the circuit on |0…0⟩.
    pub fn run(&self, weights: &[f64], data: &[f64]) -> Result<StateVector> {
        let mut state = StateVector::zero(self.n_qubits)?;
        self.run_into(weights, data, &mut state)?;
        Ok(state)
    }

    /// Runs into an existing buffer (reset to |0…0⟩ first).
    pub fn run_into(&self, weights: &[f64], data: &[f64], state: &mut StateVector) -> Result<()> {
        let angles = self.resolve_angles(weights, data)?;
        debug_assert_eq!(state.n_qubits, self.n_qubits);
        state.amps.fill(Complex64::new(0.0, 0.0));
        state.amps[0] = Complex64::new(1.0, 0.0);
        for (sg, angle) in self.gates.iter().zip(&angles) {
            let value = if sg.gate.is_rotation() { *angle } else { None };
            state.apply_in_place(&sg.gate, value)?;
        }
        Ok(())
    }
}
