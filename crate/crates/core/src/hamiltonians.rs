//! Spin-chain Hamiltonians as sums of weighted Pauli strings.
//!
//! Spin operators in the Heisenberg-type models are the bare Pauli matrices
//! (`S = sigma`, no factor 1/2), so the two-site Heisenberg singlet sits at
//! -3. Chains longer than two sites are periodic; a two-site chain has a
//! single bond.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::densmat::{qubit_mask, Operator, C64, MAX_QUBITS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> [C64; 4] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// `coefficient * prod_q sigma_q`, identity on qubits not listed.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    coefficient: f64,
    paulis: BTreeMap<usize, Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, paulis: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        if !coefficient.is_finite() || coefficient == 0.0 {
            return Err(Error::InvalidArgument(format!("term coefficient must be finite and nonzero, got {coefficient}")));
        }
        let mut map = BTreeMap::new();
        for (q, p) in paulis {
            if map.insert(q, p).is_some() {
                return Err(Error::DuplicateTargets(vec![q, q]));
            }
        }
        Ok(Self { coefficient, paulis: map })
    }

    pub fn identity(coefficient: f64) -> Result<Self> {
        Self::new(coefficient, [])
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn paulis(&self) -> &BTreeMap<usize, Pauli> {
        &self.paulis
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.paulis.keys().copied()
    }

    pub fn weight(&self) -> usize {
        self.paulis.len()
    }

    pub fn is_identity(&self) -> bool {
        self.paulis.is_empty()
    }

    /// `(x-flip mask, Y-or-Z mask, number of Y factors)` in the register's
    /// index convention.
    pub(crate) fn masks(&self, n_qubits: usize) -> (usize, usize, usize) {
        let mut x = 0;
        let mut z = 0;
        let mut n_y = 0;
        for (&q, &p) in &self.paulis {
            let m = qubit_mask(n_qubits, q);
            match p {
                Pauli::X => x |= m,
                Pauli::Y => {
                    x |= m;
                    z |= m;
                    n_y += 1;
                }
                Pauli::Z => z |= m,
            }
        }
        (x, z, n_y)
    }

    /// Dense `2^n x 2^n` matrix including the coefficient.
    pub fn to_dense(&self, n_qubits: usize) -> DMatrix<C64> {
        let mut m = Operator::zeros(n_qubits);
        self.add_to(&mut m, 1.0);
        m.to_matrix()
    }

    fn add_to(&self, op: &mut Operator, scale: f64) {
        let n = op.n_qubits();
        let (xmask, zmask, n_y) = self.masks(n);
        let y_phase = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)][n_y % 4];
        let c = y_phase * (self.coefficient * scale);
        for i in 0..op.dim() {
            let sign = if (i & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            // Row i couples to column i ^ xmask; the phase depends on the row bits.
            op.add_at(i, i ^ xmask, c * sign);
        }
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.coefficient)?;
        if self.paulis.is_empty() {
            return write!(f, " I");
        }
        for (q, p) in &self.paulis {
            write!(f, " {p}{q}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::SizeOutOfRange(0));
        }
        for t in &terms {
            if let Some(q) = t.support().find(|&q| q >= n_qubits) {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut terms = self.terms.clone();
        if shift != 0.0 {
            terms.push(PauliTerm::identity(shift)?);
        }
        Self::new(self.n_qubits, terms)
    }

    /// Trace of the dense matrix; only identity strings contribute.
    pub fn trace(&self) -> f64 {
        let dim = (1u64 << self.n_qubits) as f64;
        self.terms.iter().filter(|t| t.is_identity()).map(|t| t.coefficient * dim).sum()
    }

    pub fn to_operator(&self) -> Operator {
        let mut op = Operator::zeros(self.n_qubits);
        for t in &self.terms {
            t.add_to(&mut op, 1.0);
        }
        op
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.to_operator().to_matrix()
    }

    pub(crate) fn expectation_of(&self, state: &Operator) -> C64 {
        self.terms.iter().map(|t| state.pauli_trace(t) * t.coefficient).sum()
    }

    /// Smallest eigenvalue of the dense matrix.
    pub fn exact_ground_energy(&self) -> Result<f64> {
        if self.n_qubits > MAX_QUBITS {
            return Err(Error::SizeOutOfRange(self.n_qubits));
        }
        let dense = self.to_dense();
        let is_real = dense.iter().all(|v| v.im == 0.0);
        let min = if is_real {
            let real = dense.map(|v| v.re);
            SymmetricEigen::new(real).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            dense.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
        };
        Ok(min)
    }
}

impl fmt::Display for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H[{}q]:", self.n_qubits)?;
        for t in &self.terms {
            write!(f, " ({t})")?;
        }
        Ok(())
    }
}

/// Nearest-neighbour bonds: one bond for two sites, periodic ring otherwise.
pub fn chain_bonds(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|j| (j, (j + 1) % n)).collect(),
    }
}

fn check_chain(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("spin chain needs at least 2 sites, got {n}")));
    }
    Ok(())
}

fn push_term(terms: &mut Vec<PauliTerm>, c: f64, paulis: Vec<(usize, Pauli)>) -> Result<()> {
    if c != 0.0 {
        terms.push(PauliTerm::new(c, paulis)?);
    }
    Ok(())
}

fn push_field(terms: &mut Vec<PauliTerm>, n: usize, h: f64) -> Result<()> {
    for j in 0..n {
        push_term(terms, h, vec![(j, Pauli::Z)])?;
    }
    Ok(())
}

fn push_exchange(terms: &mut Vec<PauliTerm>, n: usize, j: f64) -> Result<()> {
    for (a, b) in chain_bonds(n) {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            push_term(terms, j, vec![(a, p), (b, p)])?;
        }
    }
    Ok(())
}

/// `J sum X_j X_{j+1} + h sum Z_j`.
pub fn tfim(n: usize, j: f64, h: f64) -> Result<Hamiltonian> {
    check_chain(n)?;
    let mut terms = Vec::new();
    for (a, b) in chain_bonds(n) {
        push_term(&mut terms, j, vec![(a, Pauli::X), (b, Pauli::X)])?;
    }
    push_field(&mut terms, n, h)?;
    Hamiltonian::new(n, terms)
}

/// `sum_bonds (XX + YY + ZZ)`.
pub fn heisenberg(n: usize) -> Result<Hamiltonian> {
    check_chain(n)?;
    let mut terms = Vec::new();
    push_exchange(&mut terms, n, 1.0)?;
    Hamiltonian::new(n, terms)
}

/// `J sum_bonds (XX + YY + ZZ) + h sum Z_j`.
pub fn t_heisenberg(n: usize, j: f64, h: f64) -> Result<Hamiltonian> {
    check_chain(n)?;
    let mut terms = Vec::new();
    push_exchange(&mut terms, n, j)?;
    push_field(&mut terms, n, h)?;
    Hamiltonian::new(n, terms)
}

/// Model selector used by configs and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfim,
    Heisenberg,
    Theisenberg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Tfim, ModelKind::Heisenberg, ModelKind::Theisenberg];

    pub fn build(self, n: usize, j: f64, h: f64) -> Result<Hamiltonian> {
        match self {
            ModelKind::Tfim => tfim(n, j, h),
            ModelKind::Heisenberg => heisenberg(n),
            ModelKind::Theisenberg => t_heisenberg(n, j, h),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tfim => "tfim",
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::Theisenberg => "theisenberg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfim" | "tising" => Ok(ModelKind::Tfim),
            "heisenberg" => Ok(ModelKind::Heisenberg),
            "theisenberg" | "t_heisenberg" => Ok(ModelKind::Theisenberg),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}
