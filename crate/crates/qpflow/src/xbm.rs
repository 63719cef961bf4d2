//! Grouped-unitary measurement of the power-flow observables.
//!
//! Every specification matrix decomposes over a shared family of short
//! circuits: entries are grouped by the XOR offset `d = j ^ k` of their
//! index pair. The `d = 0` group is already diagonal. For `d != 0`, a CNOT
//! fan-out from the qubit of the lowest set bit of `d` maps each index pair
//! `{k, k^d}` onto a pair differing in that single bit, where an H (for the
//! real part) or SDG-then-H (for the imaginary part) finishes the
//! diagonalization. Each group therefore needs at most `n + 1` gates, and
//! one family of `C` groups serves all `S` specifications at once:
//!
//! `H_s = Σ_i U_i diag(Λ_i^s) U_i^H`,
//!
//! with the stored gate list realizing the measurement-side rotation
//! `U_i^H`. The diagonals are obtained by numerically conjugating each
//! offset component and verifying the result is diagonal, which makes the
//! construction immune to basis-ordering mistakes.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::SpecSet;
use crate::qsim::{Gate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPart {
    Diagonal,
    Real,
    Imag,
}

/// One measurement group: the XOR offset it serves, the rotation circuit,
/// and the per-specification real diagonals (sparse over spec indices).
#[derive(Debug, Clone)]
pub struct XbmGroup {
    pub offset: usize,
    pub part: GroupPart,
    /// Gate list applied to the prepared state before diagonal readout.
    pub unitary: Vec<Gate>,
    /// spec index -> dense diagonal of length `2^n`.
    pub lambdas: BTreeMap<usize, Vec<f64>>,
}

impl XbmGroup {
    /// Rotated measurement probabilities |U_i^H ψ|^2, written into `probs`.
    ///
    /// The CNOT fan-out is a basis permutation and the trailing H (and SDG)
    /// act on one bit, so the whole rotation folds into one pass over the
    /// amplitude pairs. Matches gate-by-gate application to within roundoff.
    pub fn rotated_probs(&self, state: &StateVector, probs: &mut [f64]) {
        let amps = state.amps();
        debug_assert_eq!(probs.len(), amps.len());
        match self.part {
            GroupPart::Diagonal => {
                for (p, a) in probs.iter_mut().zip(amps) {
                    *p = a.norm_sqr();
                }
            }
            GroupPart::Real | GroupPart::Imag => {
                let l_mask = 1usize << self.offset.trailing_zeros();
                let rest_mask = self.offset ^ l_mask;
                let len = amps.len();
                let mut base = 0;
                while base < len {
                    for k0 in base..base + l_mask {
                        let k1 = k0 | l_mask;
                        let a = amps[k0];
                        // the fan-out flips the remaining offset bits when
                        // the pivot bit is set
                        let b = amps[k1 ^ rest_mask];
                        let (u, v) = match self.part {
                            GroupPart::Real => (a + b, a - b),
                            GroupPart::Imag => {
                                let ib = Complex64::new(b.im, -b.re); // -i b
                                (a + ib, a - ib)
                            }
                            GroupPart::Diagonal => unreachable!(),
                        };
                        probs[k0] = 0.5 * u.norm_sqr();
                        probs[k1] = 0.5 * v.norm_sqr();
                    }
                    base += l_mask << 1;
                }
            }
        }
    }

    /// Same rotation through the generic gate path (reference route).
    pub fn rotate_state(&self, state: &StateVector) -> Result<StateVector> {
        let mut rotated = state.clone();
        for gate in &self.unitary {
            rotated.apply_in_place(gate, None)?;
        }
        Ok(rotated)
    }
}

/// The shared measurement family for one specification set.
#[derive(Debug, Clone)]
pub struct XbmDecomposition {
    pub groups: Vec<XbmGroup>,
    pub n_qubits: usize,
    pub s_count: usize,
}

/// Λ_i(b) = Σ_s b_s Λ_i^s per group, precomputed once per instance.
#[derive(Debug, Clone)]
pub struct WeightedDiagonals {
    diags: Vec<Vec<f64>>,
}

const ZERO_CUT: f64 = 1e-14;

/// Decomposes every specification matrix over the shared group family.
pub fn decompose(specs: &SpecSet) -> Result<XbmDecomposition> {
    let np = specs.padded_dim();
    let n = specs.n_qubits();
    let s_count = specs.n_specs();

    // Offsets with any nonzero off-diagonal entry across all specs.
    let mut offsets: Vec<usize> = Vec::new();
    for d in 1..np {
        let present = specs.h.iter().any(|h| {
            (0..np).any(|j| {
                let k = j ^ d;
                k > j && h[[j, k]].norm() > ZERO_CUT
            })
        });
        if present {
            offsets.push(d);
        }
    }

    let mut groups = Vec::new();

    // d = 0: identity rotation, diagonals read off directly.
    let mut diag_lambdas = BTreeMap::new();
    for (s, h) in specs.h.iter().enumerate() {
        let lam: Vec<f64> = (0..np).map(|k| h[[k, k]].re).collect();
        if lam.iter().any(|x| x.abs() > ZERO_CUT) {
            diag_lambdas.insert(s, lam);
        }
    }
    if !diag_lambdas.is_empty() {
        groups.push(XbmGroup {
            offset: 0,
            part: GroupPart::Diagonal,
            unitary: Vec::new(),
            lambdas: diag_lambdas,
        });
    }

    for &d in &offsets {
        for part in [GroupPart::Real, GroupPart::Imag] {
            let unitary = group_unitary(n, d, part);
            let rotation = dense_circuit_matrix(n, &unitary)?;
            let mut lambdas = BTreeMap::new();
            for (s, h) in specs.h.iter().enumerate() {
                let component = offset_component(h, d, part);
                if component
                    .iter()
                    .all(|v| v.norm() <= ZERO_CUT)
                {
                    continue;
                }
                let lam = conjugate_to_diagonal(&rotation, &component, d)?;
                lambdas.insert(s, lam);
            }
            if !lambdas.is_empty() {
                groups.push(XbmGroup { offset: d, part, unitary, lambdas });
            }
        }
    }

    Ok(XbmDecomposition { groups, n_qubits: n, s_count })
}

/// Measurement circuit for one offset: CNOTs from the pivot qubit (lowest
/// set bit of `d`) to every other set bit, then H on the pivot, with SDG
/// first for the imaginary part. Index bit `p` lives on qubit `n - 1 - p`.
fn group_unitary(n_qubits: usize, d: usize, part: GroupPart) -> Vec<Gate> {
    let l_bit = d.trailing_zeros() as usize;
    let pivot = n_qubits - 1 - l_bit;
    let mut gates = Vec::new();
    for p in (0..n_qubits).rev() {
        if p != l_bit && d & (1 << p) != 0 {
            gates.push(Gate::cnot(pivot, n_qubits - 1 - p));
        }
    }
    if part == GroupPart::Imag {
        gates.push(Gate::sdg(pivot));
    }
    gates.push(Gate::h(pivot));
    gates
}

/// Hermitian component of `h` restricted to offset `d` and one part.
fn offset_component(h: &Array2<Complex64>, d: usize, part: GroupPart) -> Array2<Complex64> {
    let np = h.nrows();
    let mut out = Array2::from_elem((np, np), Complex64::new(0.0, 0.0));
    for j in 0..np {
        let k = j ^ d;
        if k >= np {
            continue;
        }
        let entry = h[[j, k]];
        out[[j, k]] = match part {
            GroupPart::Real => Complex64::new(entry.re, 0.0),
            GroupPart::Imag => Complex64::new(0.0, entry.im),
            GroupPart::Diagonal => entry,
        };
    }
    out
}

/// Dense matrix of a gate list (columns = circuit applied to basis states).
fn dense_circuit_matrix(n_qubits: usize, gates: &[Gate]) -> Result<Array2<Complex64>> {
    let dim = 1usize << n_qubits;
    let mut m = Array2::from_elem((dim, dim), Complex64::new(0.0, 0.0));
    for col in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[col] = Complex64::new(1.0, 0.0);
        let mut state = StateVector::from_amplitudes(amps)?;
        for gate in gates {
            state.apply_in_place(gate, None)?;
        }
        for row in 0..dim {
            m[[row, col]] = state.amps()[row];
        }
    }
    Ok(m)
}

/// Λ = diag(W M W^H) with a hard check that the result is diagonal and real.
fn conjugate_to_diagonal(
    w: &Array2<Complex64>,
    m: &Array2<Complex64>,
    offset: usize,
) -> Result<Vec<f64>> {
    let wm = w.dot(m);
    let conj = wm.dot(&w.t().mapv(|v| v.conj()));
    let np = conj.nrows();
    let mut max_off: f64 = 0.0;
    for j in 0..np {
        for k in 0..np {
            if j != k {
                max_off = max_off.max(conj[[j, k]].norm());
            }
        }
    }
    let max_imag = (0..np).fold(0.0f64, |acc, k| acc.max(conj[[k, k]].im.abs()));
    if max_off > 1e-12 || max_imag > 1e-12 {
        return Err(Error::NonDiagonalConjugation { offset, max_off: max_off.max(max_imag) });
    }
    Ok((0..np).map(|k| conj[[k, k]].re).collect())
}

impl XbmDecomposition {
    /// Number of measurement groups, `C`.
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn max_gate_count(&self) -> usize {
        self.groups.iter().map(|g| g.unitary.len()).max().unwrap_or(0)
    }

    /// Combines the per-spec diagonals under instance weights b.
    pub fn weighted_diagonals(&self, b: &[f64]) -> Result<WeightedDiagonals> {
        if b.len() != self.s_count {
            return Err(Error::LengthMismatch { expected: self.s_count, actual: b.len() });
        }
        let np = self.dim();
        let diags = self
            .groups
            .iter()
            .map(|g| {
                let mut diag = vec![0.0; np];
                for (&s, lam) in &g.lambdas {
                    let w = b[s];
                    if w == 0.0 {
                        continue;
                    }
                    for (d, &l) in diag.iter_mut().zip(lam) {
                        *d += w * l;
                    }
                }
                diag
            })
            .collect();
        Ok(WeightedDiagonals { diags })
    }

    /// Per-group diagonal expectations g[i][s] on the rotated states; the
    /// column sums are the spec expectations F_s.
    fn group_spec_table(&self, state: &StateVector, probs: &mut [f64]) -> Vec<Vec<(usize, f64)>> {
        self.groups
            .iter()
            .map(|g| {
                g.rotated_probs(state, probs);
                g.lambdas
                    .iter()
                    .map(|(&s, lam)| {
                        let val = lam.iter().zip(probs.iter()).map(|(l, p)| l * p).sum();
                        (s, val)
                    })
                    .collect()
            })
            .collect()
    }

    /// JSON summary: per group the offset, part, gate list, and the nonzero
    /// count of each spec diagonal.
    pub fn summary_json(&self) -> serde_json::Value {
        let groups: Vec<_> = self
            .groups
            .iter()
            .map(|g| {
                let gates: Vec<String> = g
                    .unitary
                    .iter()
                    .map(|gate| match gate.control {
                        Some(c) => format!("{}({},{})", gate.kind.name(), c, gate.target),
                        None => format!("{}({})", gate.kind.name(), gate.target),
                    })
                    .collect();
                let nnz: BTreeMap<String, usize> = g
                    .lambdas
                    .iter()
                    .map(|(&s, lam)| {
                        (s.to_string(), lam.iter().filter(|x| x.abs() > ZERO_CUT).count())
                    })
                    .collect();
                json!({
                    "offset": g.offset,
                    "part": g.part,
                    "gates": gates,
                    "nnz_per_spec": nnz,
                })
            })
            .collect();
        json!({
            "group_count": self.group_count(),
            "n_qubits": self.n_qubits,
            "s_count": self.s_count,
            "groups": groups,
        })
    }
}

fn check_state(decomp: &XbmDecomposition, state: &StateVector) -> Result<()> {
    if state.n_qubits() != decomp.n_qubits {
        return Err(Error::LengthMismatch {
            expected: decomp.n_qubits,
            actual: state.n_qubits(),
        });
    }
    Ok(())
}

/// Per-spec expectations F_s = ⟨ψ|H_s|ψ⟩, one rotated readout per group.
pub fn measure_f_s(state: &StateVector, decomp: &XbmDecomposition) -> Result<Vec<f64>> {
    check_state(decomp, state)?;
    let mut probs = vec![0.0; decomp.dim()];
    let mut f = vec![0.0; decomp.s_count];
    measure_f_s_into(state, decomp, &mut probs, &mut f);
    Ok(f)
}

/// Allocation-free variant for optimizer hot loops. `probs` must have the
/// padded dimension, `out` the spec count; the state size is the caller's
/// responsibility.
pub fn measure_f_s_into(
    state: &StateVector,
    decomp: &XbmDecomposition,
    probs: &mut [f64],
    out: &mut [f64],
) {
    debug_assert_eq!(state.n_qubits(), decomp.n_qubits);
    out.fill(0.0);
    for g in &decomp.groups {
        g.rotated_probs(state, probs);
        for (&s, lam) in &g.lambdas {
            out[s] += lam.iter().zip(probs.iter()).map(|(l, p)| l * p).sum::<f64>();
        }
    }
}

/// G(θ; b) = ⟨ψ| Σ_s b_s H_s |ψ⟩ measured serially as C expectations.
pub fn measure_g(state: &StateVector, decomp: &XbmDecomposition, b: &[f64]) -> Result<f64> {
    let weighted = decomp.weighted_diagonals(b)?;
    measure_g_with(state, decomp, &weighted)
}

/// Same with precomputed instance diagonals.
pub fn measure_g_with(
    state: &StateVector,
    decomp: &XbmDecomposition,
    weighted: &WeightedDiagonals,
) -> Result<f64> {
    check_state(decomp, state)?;
    let mut probs = vec![0.0; decomp.dim()];
    let mut total = 0.0;
    for (g, diag) in decomp.groups.iter().zip(&weighted.diags) {
        g.rotated_probs(state, &mut probs);
        total += diag.iter().zip(probs.iter()).map(|(d, p)| d * p).sum::<f64>();
    }
    Ok(total)
}

/// G̃ = Σ_s F_s² measured on the two-replica joint state via the pair loop:
/// replica 1 rotated by U_i^H, replica 2 by U_j^H, the product state read
/// against Λ_ij = Σ_s Λ_i^s ⊗ Λ_j^s. Only the `i <= j` pairs are evaluated,
/// doubling the off-diagonal terms by swap symmetry — C(C+1)/2 readouts.
///
/// On a product state the Λ_ij expectation factorizes into
/// Σ_s ⟨Λ_i^s⟩⟨Λ_j^s⟩, which is how each pair term is evaluated here.
pub fn measure_g_tilde(state: &StateVector, decomp: &XbmDecomposition) -> Result<f64> {
    check_state(decomp, state)?;
    let mut probs = vec![0.0; decomp.dim()];
    let table = decomp.group_spec_table(state, &mut probs);
    let c = decomp.group_count();
    let mut total = 0.0;
    for i in 0..c {
        for j in i..c {
            let term = pair_term(&table[i], &table[j]);
            total += if i == j { term } else { 2.0 * term };
        }
    }
    Ok(total)
}

/// The unoptimized full C² double loop (cross-check for the swap symmetry).
pub fn measure_g_tilde_full(state: &StateVector, decomp: &XbmDecomposition) -> Result<f64> {
    check_state(decomp, state)?;
    let mut probs = vec![0.0; decomp.dim()];
    let table = decomp.group_spec_table(state, &mut probs);
    let c = decomp.group_count();
    let mut total = 0.0;
    for i in 0..c {
        for j in 0..c {
            total += pair_term(&table[i], &table[j]);
        }
    }
    Ok(total)
}

fn pair_term(gi: &[(usize, f64)], gj: &[(usize, f64)]) -> f64 {
    // both lists are sorted by spec index
    let mut total = 0.0;
    let mut jj = 0;
    for &(s, vi) in gi {
        while jj < gj.len() && gj[jj].0 < s {
            jj += 1;
        }
        if jj < gj.len() && gj[jj].0 == s {
            total += vi * gj[jj].1;
        }
    }
    total
}

/// Shot-based G: each group's rotated state is sampled and the weighted
/// diagonal averaged over the drawn bitstrings.
pub fn measure_g_sampled(
    state: &StateVector,
    decomp: &XbmDecomposition,
    b: &[f64],
    shots: usize,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let weighted = decomp.weighted_diagonals(b)?;
    check_state(decomp, state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for (g, diag) in decomp.groups.iter().zip(&weighted.diags) {
        let rotated = g.rotate_state(state)?;
        let indices = rotated.sample_indices(shots, &mut rng);
        total += indices.iter().map(|&k| diag[k]).sum::<f64>() / shots as f64;
    }
    Ok(total)
}

/// Shot-based F_s: every spec diagonal of a group is evaluated on the same
/// drawn bitstrings, mirroring how one readout serves all specifications.
pub fn measure_f_s_sampled(
    state: &StateVector,
    decomp: &XbmDecomposition,
    shots: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    check_state(decomp, state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = vec![0.0; decomp.s_count];
    for g in &decomp.groups {
        let rotated = g.rotate_state(state)?;
        let indices = rotated.sample_indices(shots, &mut rng);
        for (&s, lam) in &g.lambdas {
            f[s] += indices.iter().map(|&k| lam[k]).sum::<f64>() / shots as f64;
        }
    }
    Ok(f)
}

/// Shot-based G̃: the two replicas are sampled independently per pair, so
/// the product estimator stays unbiased.
pub fn measure_g_tilde_sampled(
    state: &StateVector,
    decomp: &XbmDecomposition,
    shots: usize,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    check_state(decomp, state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = decomp.group_count();
    let rotated: Vec<StateVector> = decomp
        .groups
        .iter()
        .map(|g| g.rotate_state(state))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for i in 0..c {
        for j in i..c {
            let first = rotated[i].sample_indices(shots, &mut rng);
            let second = rotated[j].sample_indices(shots, &mut rng);
            let gi = &decomp.groups[i].lambdas;
            let gj = &decomp.groups[j].lambdas;
            let mut acc = 0.0;
            for (&k, &m) in first.iter().zip(&second) {
                // Λ_ij[k ⊗ m] = Σ_s Λ_i^s[k] Λ_j^s[m]
                for (s, lam_i) in gi {
                    if let Some(lam_j) = gj.get(s) {
                        acc += lam_i[k] * lam_j[m];
                    }
                }
            }
            let term = acc / shots as f64;
            total += if i == j { term } else { 2.0 * term };
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::GateKind;

    fn single_qubit_specs(h: Array2<Complex64>) -> SpecSet {
        SpecSet {
            h: vec![h],
            b: vec![1.0],
            kinds: vec![crate::grid::SpecEntry { kind: crate::grid::SpecKind::PInj, bus: 1 }],
            n_buses: 2,
        }
    }

    #[test]
    fn pauli_x_yields_single_real_group() {
        let mut h = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
        h[[0, 1]] = Complex64::new(1.0, 0.0);
        h[[1, 0]] = Complex64::new(1.0, 0.0);
        let decomp = decompose(&single_qubit_specs(h)).unwrap();
        assert_eq!(decomp.group_count(), 1);
        let g = &decomp.groups[0];
        assert_eq!(g.offset, 1);
        assert_eq!(g.part, GroupPart::Real);
        assert_eq!(g.unitary.len(), 1);
        assert_eq!(g.unitary[0].kind, GateKind::H);
        // H X H = Z
        assert!((g.lambdas[&0][0] - 1.0).abs() < 1e-14);
        assert!((g.lambdas[&0][1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_yields_identity_group() {
        let mut h = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
        h[[0, 0]] = Complex64::new(2.0, 0.0);
        h[[1, 1]] = Complex64::new(-3.0, 0.0);
        let decomp = decompose(&single_qubit_specs(h)).unwrap();
        assert_eq!(decomp.group_count(), 1);
        assert_eq!(decomp.groups[0].offset, 0);
        assert!(decomp.groups[0].unitary.is_empty());
        assert_eq!(decomp.groups[0].lambdas[&0], vec![2.0, -3.0]);
    }

    #[test]
    fn pauli_y_yields_single_imag_group() {
        let mut h = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
        h[[0, 1]] = Complex64::new(0.0, -1.0);
        h[[1, 0]] = Complex64::new(0.0, 1.0);
        let decomp = decompose(&single_qubit_specs(h)).unwrap();
        assert_eq!(decomp.group_count(), 1);
        let g = &decomp.groups[0];
        assert_eq!(g.part, GroupPart::Imag);
        assert_eq!(g.unitary.len(), 2);
        assert_eq!(g.unitary[0].kind, GateKind::Sdg);
        assert_eq!(g.unitary[1].kind, GateKind::H);
    }

    #[test]
    fn fast_probs_match_gate_path() {
        // 3-qubit Hermitian with entries on several offsets and both parts
        let n = 3;
        let dim = 1 << n;
        let mut h = Array2::from_elem((dim, dim), Complex64::new(0.0, 0.0));
        let pairs = [(0usize, 5usize, 0.7, -0.3), (1, 6, -0.2, 0.9), (2, 3, 1.1, 0.4)];
        for &(j, k, re, im) in &pairs {
            h[[j, k]] = Complex64::new(re, im);
            h[[k, j]] = Complex64::new(re, -im);
        }
        h[[4, 4]] = Complex64::new(0.5, 0.0);
        let specs = SpecSet {
            h: vec![h],
            b: vec![1.0],
            kinds: vec![crate::grid::SpecEntry { kind: crate::grid::SpecKind::PInj, bus: 1 }],
            n_buses: 8,
        };
        let decomp = decompose(&specs).unwrap();

        let mut state = StateVector::zero(n).unwrap();
        for q in 0..n {
            state.apply_in_place(&Gate::ry(q, 0.4 + 0.3 * q as f64), None).unwrap();
            state.apply_in_place(&Gate::rz(q, -0.8 + 0.5 * q as f64), None).unwrap();
        }
        state.apply_in_place(&Gate::cnot(0, 2), None).unwrap();

        let mut probs = vec![0.0; dim];
        for g in &decomp.groups {
            g.rotated_probs(&state, &mut probs);
            let reference = g.rotate_state(&state).unwrap().probabilities();
            for (a, b) in probs.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-13, "group {:?} offset {}", g.part, g.offset);
            }
        }
    }

    #[test]
    fn measure_g_zero_b_is_zero() {
        let mut h = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
        h[[0, 1]] = Complex64::new(1.0, 0.0);
        h[[1, 0]] = Complex64::new(1.0, 0.0);
        let specs = single_qubit_specs(h);
        let decomp = decompose(&specs).unwrap();
        let state = StateVector::zero(1).unwrap();
        assert_eq!(measure_g(&state, &decomp, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_spec_g_tilde_is_squared_expectation() {
        // S = 1 with H = Z: G̃ must equal ⟨Z⟩².
        let mut h = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
        h[[0, 0]] = Complex64::new(1.0, 0.0);
        h[[1, 1]] = Complex64::new(-1.0, 0.0);
        let specs = single_qubit_specs(h);
        let decomp = decompose(&specs).unwrap();
        let state = StateVector::zero(1)
            .unwrap()
            .apply_gate(&Gate::ry(0, 0.9), None)
            .unwrap();
        let z = state.expectation(&[1.0, -1.0]).unwrap();
        let gt = measure_g_tilde(&state, &decomp).unwrap();
        assert!((gt - z * z).abs() < 1e-14);
    }

    #[test]
    fn weighted_diagonal_length_checked() {
        let mut h = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
        h[[0, 0]] = Complex64::new(1.0, 0.0);
        let specs = single_qubit_specs(h);
        let decomp = decompose(&specs).unwrap();
        assert!(decomp.weighted_diagonals(&[1.0, 2.0]).is_err());
    }
}
