//! Dense density-matrix states and the kernels that act on them.
//!
//! Basis convention: qubit 0 is the most significant bit of a
//! computational-basis index, so for two qubits `|q0 q1>` has index
//! `2*q0 + q1`. Every module in the crate uses this ordering, including the
//! bitstrings produced by [`crate::measurement`].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channels::{KrausChannel, Transfer};
use crate::error::{Error, Result};
use crate::hamiltonians::{Hamiltonian, PauliTerm};

pub type C64 = Complex64;

/// Largest register the dense backend accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) const STATE_TOL: f64 = 1e-10;
pub(crate) const PSD_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn qubit_mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Global index offsets of the `2^k` local basis states spanned by `targets`.
/// `targets[0]` is the most significant bit of the local index.
fn local_offsets(n_qubits: usize, targets: &[usize]) -> ([usize; 4], usize) {
    let k = targets.len();
    let mut offsets = [0usize; 4];
    for (l, slot) in offsets.iter_mut().enumerate().take(1 << k) {
        let mut off = 0;
        for (j, &t) in targets.iter().enumerate() {
            if (l >> (k - 1 - j)) & 1 == 1 {
                off |= qubit_mask(n_qubits, t);
            }
        }
        *slot = off;
    }
    let all = targets.iter().fold(0, |m, &t| m | qubit_mask(n_qubits, t));
    (offsets, all)
}

pub(crate) fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    for &t in targets {
        if t >= n_qubits {
            return Err(Error::QubitOutOfRange { index: t, n_qubits });
        }
    }
    for (i, a) in targets.iter().enumerate() {
        if targets[i + 1..].contains(a) {
            return Err(Error::DuplicateTargets(targets.to_vec()));
        }
    }
    Ok(())
}

/// Square complex operator on an n-qubit register, stored row-major.
///
/// Used both for states and for Heisenberg-picture observables; it carries no
/// trace or positivity guarantees on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    n_qubits: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self { n_qubits, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut op = Self::zeros(n_qubits);
        let dim = op.dim();
        for i in 0..dim {
            op.data[i * dim + i] = ONE;
        }
        op
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Result<Self> {
        let dim = m.nrows();
        if dim != m.ncols() || !dim.is_power_of_two() || dim < 2 {
            return Err(Error::DimensionMismatch { expected: dim.next_power_of_two().max(2), actual: m.ncols() });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(m[(r, c)]);
            }
        }
        Ok(Self { n_qubits, data })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    #[inline]
    pub(crate) fn add_at(&mut self, row: usize, col: usize, v: C64) {
        let dim = self.dim();
        self.data[row * dim + col] += v;
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |r, c| self.data[r * dim + c])
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// `Tr(self * other)`.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let dim = self.dim();
        let mut acc = ZERO;
        for i in 0..dim {
            let row = &self.data[i * dim..(i + 1) * dim];
            for (j, a) in row.iter().enumerate() {
                acc += a * other.data[j * dim + i];
            }
        }
        acc
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.data[r * dim + c] - self.data[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &Operator, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// In place `U * self * U^dagger`, with `u` a row-major `2^k x 2^k` matrix.
    pub(crate) fn conjugate_by(&mut self, u: &[C64], targets: &[usize]) {
        let n = self.n_qubits;
        let dim = self.dim();
        let k = targets.len();
        let d = 1 << k;
        let (offsets, tmask) = local_offsets(n, targets);
        let mut v = [ZERO; 4];
        // Left multiplication acts on rows: column-wise sweep.
        for base in (0..dim).filter(|b| b & tmask == 0) {
            for c in 0..dim {
                for l in 0..d {
                    v[l] = self.data[(base + offsets[l]) * dim + c];
                }
                for a in 0..d {
                    let mut acc = ZERO;
                    for m in 0..d {
                        acc += u[a * d + m] * v[m];
                    }
                    self.data[(base + offsets[a]) * dim + c] = acc;
                }
            }
        }
        // Right multiplication by U^dagger acts on columns.
        for r in 0..dim {
            let row = &mut self.data[r * dim..(r + 1) * dim];
            for base in (0..dim).filter(|b| b & tmask == 0) {
                for l in 0..d {
                    v[l] = row[base + offsets[l]];
                }
                for a in 0..d {
                    let mut acc = ZERO;
                    for m in 0..d {
                        acc += v[m] * u[a * d + m].conj();
                    }
                    row[base + offsets[a]] = acc;
                }
            }
        }
    }

    /// In place `sum_k E_k * self * E_k^dagger` through the channel's
    /// precomputed block transfer map.
    pub(crate) fn apply_transfer(&mut self, transfer: &Transfer, targets: &[usize]) {
        let n = self.n_qubits;
        let dim = self.dim();
        let d = 1 << targets.len();
        let (offsets, tmask) = local_offsets(n, targets);
        let bases: Vec<usize> = (0..dim).filter(|b| b & tmask == 0).collect();
        let mut block = [ZERO; 16];
        let mut out = [ZERO; 16];
        for &rb in &bases {
            for &cb in &bases {
                for a in 0..d {
                    let row = (rb + offsets[a]) * dim + cb;
                    for b in 0..d {
                        block[a * d + b] = self.data[row + offsets[b]];
                    }
                }
                out[..d * d].fill(ZERO);
                for &(o, i, s) in transfer.entries() {
                    out[o as usize] += s * block[i as usize];
                }
                for a in 0..d {
                    let row = (rb + offsets[a]) * dim + cb;
                    for b in 0..d {
                        self.data[row + offsets[b]] = out[a * d + b];
                    }
                }
            }
        }
    }

    /// In place `(1 - eps) * self + eps * Tr(self) * I / 2^n`.
    pub(crate) fn depolarize_globally(&mut self, eps: f64) {
        let dim = self.dim();
        let tr = self.trace();
        self.scale(1.0 - eps);
        let shift = tr * (eps / dim as f64);
        for i in 0..dim {
            self.data[i * dim + i] += shift;
        }
    }

    /// `Tr(P * self)` for a single Pauli string, without materializing `P`.
    pub(crate) fn pauli_trace(&self, term: &PauliTerm) -> C64 {
        let dim = self.dim();
        let (xmask, zmask, n_y) = term.masks(self.n_qubits);
        let y_phase = match n_y % 4 {
            0 => ONE,
            1 => C64::new(0.0, -1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, 1.0),
        };
        let mut acc = ZERO;
        for i in 0..dim {
            let v = self.data[(i ^ xmask) * dim + i];
            if (i & zmask).count_ones() % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc * y_phase
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        let (da, db) = (self.dim(), other.dim());
        let n = self.n_qubits + other.n_qubits;
        let dim = da * db;
        let mut data = vec![ZERO; dim * dim];
        for ra in 0..da {
            for ca in 0..da {
                let a = self.data[ra * da + ca];
                if a == ZERO {
                    continue;
                }
                for rb in 0..db {
                    for cb in 0..db {
                        data[(ra * db + rb) * dim + ca * db + cb] = a * other.data[rb * db + cb];
                    }
                }
            }
        }
        Operator { n_qubits: n, data }
    }
}

/// Unit-trace Hermitian positive-semidefinite state of an n-qubit register.
///
/// Values are immutable: every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::SizeOutOfRange(n_qubits));
    }
    Ok(())
}

impl DensityMatrix {
    /// `|0...0><0...0|`.
    pub fn ground_state(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let mut op = Operator::zeros(n_qubits);
        op.data[0] = ONE;
        Ok(Self { op })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let mut op = Operator::identity(n_qubits);
        op.scale(1.0 / op.dim() as f64);
        Ok(Self { op })
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::DimensionMismatch { expected: dim.next_power_of_two().max(2), actual: dim });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_size(n_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("state vector norm {norm}")));
        }
        let mut op = Operator::zeros(n_qubits);
        for r in 0..dim {
            for c in 0..dim {
                op.data[r * dim + c] = amplitudes[r] * amplitudes[c].conj();
            }
        }
        Ok(Self { op })
    }

    /// Validates trace, Hermiticity and positivity before accepting `m`.
    pub fn from_matrix(m: &DMatrix<C64>) -> Result<Self> {
        let op = Operator::from_matrix(m)?;
        check_size(op.n_qubits)?;
        let state = Self { op };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.op.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let herm = self.op.max_hermitian_deviation();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("Hermiticity deviation {herm:e}")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.op.to_matrix();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.op.n_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    #[inline]
    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.op.get(row, col)
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        self.op.to_matrix()
    }

    pub fn trace(&self) -> C64 {
        self.op.trace()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.op.trace_product(&self.op).re
    }

    /// Diagonal of the state: computational-basis outcome probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.op.get(i, i).re.max(0.0)).collect()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.op.max_abs_diff(&other.op)
    }

    /// `self (x) other`, with `self` on the leading (more significant) qubits.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        check_size(self.n_qubits() + other.n_qubits())?;
        Ok(Self { op: self.op.kron(&other.op) })
    }

    /// Convex combination `a * self + (1 - a) * other`.
    pub fn mix(&self, other: &DensityMatrix, a: f64) -> Result<DensityMatrix> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidProbability(a));
        }
        let mut op = self.op.clone();
        op.scale(a);
        op.add_scaled(&other.op, 1.0 - a);
        Ok(Self { op })
    }

    pub fn apply_unitary(&self, gate: &UnitaryGate) -> Result<DensityMatrix> {
        check_targets(self.n_qubits(), gate.targets())?;
        let mut next = self.clone();
        next.op.conjugate_by(gate.row_major(), gate.targets());
        Ok(next)
    }

    pub fn apply_channel(&self, channel: &KrausChannel, targets: &[usize]) -> Result<DensityMatrix> {
        if channel.arity() != targets.len() {
            return Err(Error::ArityMismatch { expected: channel.arity(), actual: targets.len() });
        }
        check_targets(self.n_qubits(), targets)?;
        let mut next = self.clone();
        next.op.apply_transfer(channel.transfer(), targets);
        Ok(next)
    }

    /// Whole-register depolarizing `(1 - eps) rho + eps I / 2^n`.
    pub fn depolarize_globally(&self, eps: f64) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidProbability(eps));
        }
        let mut next = self.clone();
        next.op.depolarize_globally(eps);
        Ok(next)
    }

    /// `Tr(H rho)`.
    pub fn expectation(&self, observable: &Hamiltonian) -> Result<f64> {
        if observable.n_qubits() != self.n_qubits() {
            return Err(Error::DimensionMismatch { expected: self.n_qubits(), actual: observable.n_qubits() });
        }
        let value = observable.expectation_of(&self.op);
        debug_assert!(value.im.abs() < 1e-9, "imaginary expectation residue {}", value.im);
        Ok(value.re)
    }

    pub(crate) fn op_mut(&mut self) -> &mut Operator {
        &mut self.op
    }
}

/// Unitary acting on one or two ordered target qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    matrix: Vec<C64>,
    targets: Vec<usize>,
}

impl UnitaryGate {
    /// `matrix` is row-major with side `2^targets.len()`.
    pub fn new(matrix: Vec<C64>, targets: Vec<usize>) -> Result<Self> {
        let k = targets.len();
        if !(1..=2).contains(&k) {
            return Err(Error::InvalidArgument(format!("gates act on 1 or 2 qubits, got {k}")));
        }
        let d = 1 << k;
        if matrix.len() != d * d {
            return Err(Error::ArityMismatch { expected: (matrix.len() as f64).sqrt().log2() as usize, actual: k });
        }
        if targets[0] == *targets.last().unwrap() && k == 2 {
            return Err(Error::DuplicateTargets(targets));
        }
        let mut dev = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut acc = ZERO;
                for m in 0..d {
                    acc += matrix[a * d + m] * matrix[b * d + m].conj();
                }
                let expect = if a == b { ONE } else { ZERO };
                dev = dev.max((acc - expect).norm());
            }
        }
        if dev > STATE_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix, targets })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn row_major(&self) -> &[C64] {
        &self.matrix
    }

    pub fn adjoint(&self) -> UnitaryGate {
        let d = 1 << self.targets.len();
        let mut m = vec![ZERO; d * d];
        for a in 0..d {
            for b in 0..d {
                m[a * d + b] = self.matrix[b * d + a].conj();
            }
        }
        UnitaryGate { matrix: m, targets: self.targets.clone() }
    }

    pub fn identity(qubit: usize) -> Self {
        Self { matrix: vec![ONE, ZERO, ZERO, ONE], targets: vec![qubit] }
    }

    pub fn x(qubit: usize) -> Self {
        Self { matrix: vec![ZERO, ONE, ONE, ZERO], targets: vec![qubit] }
    }

    pub fn hadamard(qubit: usize) -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { matrix: vec![s, s, s, -s], targets: vec![qubit] }
    }

    /// `exp(-i theta Y / 2)`.
    pub fn ry(theta: f64, qubit: usize) -> Self {
        Self { matrix: ry_matrix(theta).to_vec(), targets: vec![qubit] }
    }

    /// `exp(-i theta Z / 2)`.
    pub fn rz(theta: f64, qubit: usize) -> Self {
        Self { matrix: rz_matrix(theta).to_vec(), targets: vec![qubit] }
    }

    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        if control == target {
            return Err(Error::DuplicateTargets(vec![control, target]));
        }
        Ok(Self { matrix: CNOT.to_vec(), targets: vec![control, target] })
    }
}

pub(crate) fn ry_matrix(theta: f64) -> [C64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    [C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)]
}

pub(crate) fn rz_matrix(theta: f64) -> [C64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    [C64::new(c, -s), ZERO, ZERO, C64::new(c, s)]
}

pub(crate) const CNOT: [C64; 16] = [
    ONE, ZERO, ZERO, ZERO, //
    ZERO, ONE, ZERO, ZERO, //
    ZERO, ZERO, ZERO, ONE, //
    ZERO, ZERO, ONE, ZERO,
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping, dephasing, depolarizing, KrausChannel};
    use crate::hamiltonians::{tfim, Hamiltonian, Pauli, PauliTerm};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis_state(n: usize, index: usize) -> DensityMatrix {
        let mut amp = vec![ZERO; 1 << n];
        amp[index] = ONE;
        DensityMatrix::from_pure(&amp).unwrap()
    }

    #[test]
    fn ground_state_shapes() {
        let one = DensityMatrix::ground_state(1).unwrap();
        assert_eq!(one.matrix(), DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]));
        let two = DensityMatrix::ground_state(2).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let expect = if r == 0 && col == 0 { ONE } else { ZERO };
                assert_eq!(two.element(r, col), expect);
            }
        }
        assert_eq!(DensityMatrix::ground_state(13), Err(Error::SizeOutOfRange(13)));
        assert_eq!(DensityMatrix::ground_state(0), Err(Error::SizeOutOfRange(0)));
    }

    #[test]
    fn x_flips_zero_to_one() {
        let rho = DensityMatrix::ground_state(1).unwrap().apply_unitary(&UnitaryGate::x(0)).unwrap();
        assert_eq!(rho, basis_state(1, 1));
    }

    #[test]
    fn identity_gate_is_noop() {
        let rho = DensityMatrix::ground_state(2)
            .unwrap()
            .apply_unitary(&UnitaryGate::hadamard(1))
            .unwrap();
        let out = rho.apply_unitary(&UnitaryGate::identity(0)).unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn cnot_maps_10_to_11() {
        // |10> has index 2 under the qubit-0-is-MSB convention.
        let rho = basis_state(2, 0b10);
        let out = rho.apply_unitary(&UnitaryGate::cnot(0, 1).unwrap()).unwrap();
        assert!(out.max_abs_diff(&basis_state(2, 0b11)) < 1e-15);
        // Reversed control leaves |10> alone (control qubit 1 is 0).
        let out = rho.apply_unitary(&UnitaryGate::cnot(1, 0).unwrap()).unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn non_adjacent_cnot_on_three_qubits() {
        // |100> -> |101> under CNOT(0, 2).
        let out = basis_state(3, 0b100).apply_unitary(&UnitaryGate::cnot(0, 2).unwrap()).unwrap();
        assert!(out.max_abs_diff(&basis_state(3, 0b101)) < 1e-15);
    }

    #[test]
    fn unitary_errors() {
        let rho = DensityMatrix::ground_state(2).unwrap();
        assert!(matches!(rho.apply_unitary(&UnitaryGate::x(2)), Err(Error::QubitOutOfRange { .. })));
        assert!(UnitaryGate::cnot(1, 1).is_err());
        assert!(matches!(
            UnitaryGate::new(vec![ONE, ONE, ZERO, ONE], vec![0]),
            Err(Error::NotUnitary(_))
        ));
        assert!(matches!(UnitaryGate::new(CNOT.to_vec(), vec![0]), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn amplitude_damping_full_decay() {
        let rho = basis_state(1, 1);
        let out = rho.apply_channel(&amplitude_damping(1.0).unwrap(), &[0]).unwrap();
        assert!(out.max_abs_diff(&basis_state(1, 0)) < 1e-15);
    }

    #[test]
    fn identity_channel_is_noop() {
        let id = KrausChannel::new(1, vec![vec![ONE, ZERO, ZERO, ONE]], "identity").unwrap();
        let rho = DensityMatrix::ground_state(2)
            .unwrap()
            .apply_unitary(&UnitaryGate::ry(0.7, 0))
            .unwrap();
        let out = rho.apply_channel(&id, &[0]).unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn half_dephasing_kills_coherence() {
        let plus = DensityMatrix::from_pure(&[c(0.5f64.sqrt()), c(0.5f64.sqrt())]).unwrap();
        let out = plus.apply_channel(&dephasing(0.5).unwrap(), &[0]).unwrap();
        let expect = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn channel_arity_mismatch() {
        let rho = DensityMatrix::ground_state(2).unwrap();
        let err = rho.apply_channel(&depolarizing(0.1).unwrap(), &[0, 1]).unwrap_err();
        assert_eq!(err, Error::ArityMismatch { expected: 1, actual: 2 });
        assert!(rho.apply_channel(&depolarizing(0.1).unwrap(), &[5]).is_err());
    }

    #[test]
    fn expectation_examples() {
        let z = Hamiltonian::new(1, vec![PauliTerm::new(1.0, vec![(0, Pauli::Z)]).unwrap()]).unwrap();
        assert_eq!(DensityMatrix::ground_state(1).unwrap().expectation(&z).unwrap(), 1.0);
        assert_eq!(DensityMatrix::maximally_mixed(1).unwrap().expectation(&z).unwrap(), 0.0);
        let wrong = DensityMatrix::ground_state(3).unwrap();
        assert!(matches!(wrong.expectation(&z), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tfim_ground_projector_energy() {
        let h = tfim(2, 1.0, 1.0).unwrap();
        let dense = h.to_dense();
        let eig = dense.symmetric_eigen();
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let v: Vec<C64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        let rho = DensityMatrix::from_pure(&v).unwrap();
        assert!((rho.expectation(&h).unwrap() - (-2.23607)).abs() < 1e-5);
    }

    #[test]
    fn from_matrix_rejects_invalid_states() {
        let not_unit = DMatrix::from_row_slice(2, 2, &[c(0.5), ZERO, ZERO, c(0.4)]);
        assert!(DensityMatrix::from_matrix(&not_unit).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[c(1.2), ZERO, ZERO, c(-0.2)]);
        assert!(DensityMatrix::from_matrix(&negative).is_err());
        let non_herm = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.1), ZERO, c(0.5)]);
        assert!(DensityMatrix::from_matrix(&non_herm).is_err());
    }

    #[test]
    fn pauli_trace_matches_dense_product() {
        let rho = DensityMatrix::ground_state(3)
            .unwrap()
            .apply_unitary(&UnitaryGate::ry(0.3, 0))
            .unwrap()
            .apply_unitary(&UnitaryGate::rz(1.1, 0))
            .unwrap()
            .apply_unitary(&UnitaryGate::cnot(0, 2).unwrap())
            .unwrap()
            .apply_unitary(&UnitaryGate::ry(-0.8, 1))
            .unwrap();
        for paulis in [
            vec![(0, Pauli::Y), (2, Pauli::X)],
            vec![(0, Pauli::Y), (1, Pauli::Y), (2, Pauli::Z)],
            vec![(1, Pauli::X)],
        ] {
            let term = PauliTerm::new(1.0, paulis).unwrap();
            let dense = term.to_dense(3);
            let expect = (dense * rho.matrix()).trace();
            let got = rho.as_operator().pauli_trace(&term);
            assert!((got - expect).norm() < 1e-12, "{got} vs {expect}");
        }
    }
}
