//! Hardware-efficient brick-layer ansatz.
//!
//! One logical layer holds two physical layers of blocks: first on pairs
//! `(2i, 2i+1)`, then on pairs `(2j+1, 2j+2)`. A block on `(a, b)` applies
//! `Ry`, `Rz` to `a`, then `Ry`, `Rz` to `b`, then `CNOT(a -> b)`.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::channels::{NoiseSpec, TwoQubitNoise};
use crate::densmat::{ry_matrix, rz_matrix, DensityMatrix, Operator, CNOT, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Y,
    Z,
}

impl Axis {
    /// `exp(-i theta P / 2)`.
    pub fn rotation(self, theta: f64) -> [C64; 4] {
        match self {
            Axis::Y => ry_matrix(theta),
            Axis::Z => rz_matrix(theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Cnot { control: usize, target: usize },
    Rotation { axis: Axis, qubit: usize, param: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitLayout {
    n_qubits: usize,
    depth: usize,
    slots: Vec<Slot>,
}

fn check_shape(n_qubits: usize, depth: usize) -> Result<()> {
    if n_qubits < 2 || !n_qubits.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("ansatz needs an even qubit count >= 2, got {n_qubits}")));
    }
    if n_qubits > crate::densmat::MAX_QUBITS {
        return Err(Error::SizeOutOfRange(n_qubits));
    }
    if depth < 1 {
        return Err(Error::InvalidArgument("ansatz depth must be at least 1".into()));
    }
    Ok(())
}

/// `(n_qubits - 1) * 4 * depth`.
pub fn parameter_count(n_qubits: usize, depth: usize) -> Result<usize> {
    check_shape(n_qubits, depth)?;
    Ok((n_qubits - 1) * 4 * depth)
}

pub fn build_layout(n_qubits: usize, depth: usize) -> Result<CircuitLayout> {
    check_shape(n_qubits, depth)?;
    let mut slots = Vec::with_capacity(depth * (n_qubits - 1) * 5);
    let mut param = 0;
    let mut block = |slots: &mut Vec<Slot>, a: usize, b: usize| {
        for q in [a, b] {
            for axis in [Axis::Y, Axis::Z] {
                slots.push(Slot::Rotation { axis, qubit: q, param });
                param += 1;
            }
        }
        slots.push(Slot::Cnot { control: a, target: b });
    };
    for _ in 0..depth {
        for i in 0..n_qubits / 2 {
            block(&mut slots, 2 * i, 2 * i + 1);
        }
        for j in 0..n_qubits / 2 - 1 {
            block(&mut slots, 2 * j + 1, 2 * j + 2);
        }
    }
    Ok(CircuitLayout { n_qubits, depth, slots })
}

impl CircuitLayout {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn n_params(&self) -> usize {
        (self.n_qubits - 1) * 4 * self.depth
    }

    pub fn n_cnots(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::Cnot { .. })).count()
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::ParameterLength { expected: self.n_params(), actual: params.len() });
        }
        Ok(())
    }
}

impl fmt::Display for CircuitLayout {
    /// One text row per qubit, one column per slot.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rows = vec![String::new(); self.n_qubits];
        for slot in &self.slots {
            let cells: Vec<String> = (0..self.n_qubits)
                .map(|q| match *slot {
                    Slot::Rotation { axis, qubit, param } if qubit == q => format!("R{axis:?}{param}").to_lowercase(),
                    Slot::Cnot { control, .. } if control == q => "@".to_string(),
                    Slot::Cnot { target, .. } if target == q => "X".to_string(),
                    Slot::Cnot { control, target } if q > control.min(target) && q < control.max(target) => {
                        "|".to_string()
                    }
                    _ => String::new(),
                })
                .collect();
            let width = cells.iter().map(|c| c.len()).max().unwrap_or(0);
            for (row, cell) in rows.iter_mut().zip(cells) {
                row.push('-');
                row.push_str(&cell);
                row.push_str(&"-".repeat(width - cell.len()));
            }
        }
        for (q, row) in rows.iter().enumerate() {
            writeln!(f, "q{q}: {row}-")?;
        }
        Ok(())
    }
}

/// Circuit parameters in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(layout: &CircuitLayout) -> Self {
        Self(vec![0.0; layout.n_params()])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn apply_gate(op: &mut Operator, slot: &Slot, params: &[f64]) {
    match *slot {
        Slot::Cnot { control, target } => op.conjugate_by(&CNOT, &[control, target]),
        Slot::Rotation { axis, qubit, param } => op.conjugate_by(&axis.rotation(params[param]), &[qubit]),
    }
}

pub(crate) fn apply_gate_noise(op: &mut Operator, slot: &Slot, noise: &NoiseSpec) {
    match *slot {
        Slot::Rotation { qubit, .. } => {
            for ch in noise.single_qubit() {
                op.apply_transfer(ch.transfer(), &[qubit]);
            }
        }
        Slot::Cnot { control, target } => {
            for entry in noise.two_qubit() {
                match entry {
                    TwoQubitNoise::Joint(ch) => op.apply_transfer(ch.transfer(), &[control, target]),
                    TwoQubitNoise::PerQubit(ch) => {
                        op.apply_transfer(ch.transfer(), &[control]);
                        op.apply_transfer(ch.transfer(), &[target]);
                    }
                }
            }
        }
    }
}

/// Heisenberg-picture inverse order of [`apply_gate_noise`].
pub(crate) fn apply_gate_noise_adjoint(op: &mut Operator, slot: &Slot, noise: &NoiseSpec) {
    match *slot {
        Slot::Rotation { qubit, .. } => {
            for ch in noise.single_qubit().iter().rev() {
                op.apply_transfer(ch.adjoint_transfer(), &[qubit]);
            }
        }
        Slot::Cnot { control, target } => {
            for entry in noise.two_qubit().iter().rev() {
                match entry {
                    TwoQubitNoise::Joint(ch) => op.apply_transfer(ch.adjoint_transfer(), &[control, target]),
                    TwoQubitNoise::PerQubit(ch) => {
                        op.apply_transfer(ch.adjoint_transfer(), &[target]);
                        op.apply_transfer(ch.adjoint_transfer(), &[control]);
                    }
                }
            }
        }
    }
}

/// `U^dagger O U` for the slot's gate.
pub(crate) fn apply_gate_adjoint(op: &mut Operator, slot: &Slot, params: &[f64]) {
    match *slot {
        // CNOT is self-inverse.
        Slot::Cnot { control, target } => op.conjugate_by(&CNOT, &[control, target]),
        Slot::Rotation { axis, qubit, param } => op.conjugate_by(&axis.rotation(-params[param]), &[qubit]),
    }
}

/// Runs the circuit on `|0...0>`, applying the noise channels for each
/// gate's arity right after the gate.
pub fn execute(layout: &CircuitLayout, params: &[f64], noise: Option<&NoiseSpec>) -> Result<DensityMatrix> {
    layout.check_params(params)?;
    let mut state = DensityMatrix::ground_state(layout.n_qubits)?;
    let op = state.op_mut();
    for slot in &layout.slots {
        apply_gate(op, slot, params);
        if let Some(noise) = noise {
            apply_gate_noise(op, slot, noise);
        }
    }
    if let Some(eps) = noise.and_then(|n| n.output_depolarizing()) {
        op.depolarize_globally(eps);
    }
    Ok(state)
}
