//! Shot-based measurement in Pauli bases, readout confusion and its linear
//! inversion.
//!
//! Bitstrings follow the state index convention: character `q` is qubit `q`,
//! so qubit 0 is the leftmost (most significant) bit.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::io;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{execute, CircuitLayout};
use crate::channels::NoiseSpec;
use crate::densmat::{DensityMatrix, UnitaryGate, C64};
use crate::error::{Error, Result};
use crate::hamiltonians::{Hamiltonian, Pauli};

pub const DEFAULT_SHOTS: u64 = 8192;
const MAX_CONDITION: f64 = 1e8;

/// Terms measurable together after one single-qubit basis rotation per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisGroup {
    pub basis: BTreeMap<usize, Pauli>,
    /// Indices into `Hamiltonian::terms`.
    pub terms: Vec<usize>,
}

impl BasisGroup {
    fn accepts(&self, paulis: &BTreeMap<usize, Pauli>) -> bool {
        paulis.iter().all(|(q, p)| self.basis.get(q).is_none_or(|b| b == p))
    }
}

/// Greedy qubit-wise commuting grouping in term order. Identity terms are
/// constants and belong to no group.
pub fn group_terms(h: &Hamiltonian) -> Vec<BasisGroup> {
    let mut groups: Vec<BasisGroup> = Vec::new();
    for (i, t) in h.terms().iter().enumerate() {
        if t.is_identity() {
            continue;
        }
        match groups.iter_mut().find(|g| g.accepts(t.paulis())) {
            Some(g) => {
                g.basis.extend(t.paulis().iter().map(|(&q, &p)| (q, p)));
                g.terms.push(i);
            }
            None => groups.push(BasisGroup { basis: t.paulis().clone(), terms: vec![i] }),
        }
    }
    groups
}

/// Counts (`shots` set) or a probability vector indexed by bitstring.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsDistribution {
    n_qubits: usize,
    values: Vec<f64>,
    shots: Option<u64>,
    quasi: bool,
}

impl CountsDistribution {
    pub fn from_counts(n_qubits: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << n_qubits, actual: counts.len() });
        }
        let shots = counts.iter().sum();
        Ok(Self { n_qubits, values: counts.into_iter().map(|c| c as f64).collect(), shots: Some(shots), quasi: false })
    }

    pub fn from_probabilities(n_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << n_qubits, actual: probs.len() });
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < -1e-12) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("not a probability vector (sum {total})")));
        }
        Ok(Self { n_qubits, values: probs, shots: None, quasi: false })
    }

    pub fn point_mass(n_qubits: usize, index: usize) -> Self {
        let mut values = vec![0.0; 1 << n_qubits];
        values[index] = 1.0;
        Self { n_qubits, values, shots: None, quasi: false }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    pub fn is_quasi(&self) -> bool {
        self.quasi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Frequencies for counts; the stored vector otherwise.
    pub fn normalized(&self) -> Vec<f64> {
        match self.shots {
            Some(s) if s > 0 => self.values.iter().map(|v| v / s as f64).collect(),
            _ => self.values.clone(),
        }
    }

    pub fn bitstring(&self, index: usize) -> String {
        (0..self.n_qubits).map(|q| if index >> (self.n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
    }

    /// Nonzero entries keyed by bitstring.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (self.bitstring(i), v)).collect()
    }

    /// Parses a `{bitstring: count}` map.
    pub fn from_count_map(n_qubits: usize, map: &BTreeMap<String, u64>) -> Result<Self> {
        let mut counts = vec![0u64; 1 << n_qubits];
        for (k, &c) in map {
            if k.len() != n_qubits {
                return Err(Error::InvalidArgument(format!("bitstring '{k}' has wrong length")));
            }
            let idx = usize::from_str_radix(k, 2).map_err(|_| Error::InvalidArgument(format!("bad bitstring '{k}'")))?;
            counts[idx] += c;
        }
        Self::from_counts(n_qubits, counts)
    }
}

/// Column-stochastic readout matrix: `P[k][j]` is the chance of reading `k`
/// when the true string is `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n_qubits: usize,
    p: DMatrix<f64>,
}

impl ConfusionMatrix {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let d = p.nrows();
        if d != p.ncols() || !d.is_power_of_two() || d < 2 {
            return Err(Error::DimensionMismatch { expected: d, actual: p.ncols() });
        }
        if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument("confusion entries must lie in [0, 1]".into()));
        }
        for j in 0..d {
            let s: f64 = p.column(j).sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!("column {j} sums to {s}")));
            }
        }
        Ok(Self { n_qubits: d.trailing_zeros() as usize, p })
    }

    /// Row-major nested rows, `rows[k][j] = P(read k | true j)`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, p: DMatrix::identity(1 << n_qubits, 1 << n_qubits) }
    }

    /// Independent readout errors; `rates[q] = (P(read 1 | 0), P(read 0 | 1))`.
    pub fn from_flip_rates(rates: &[(f64, f64)]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::SizeOutOfRange(0));
        }
        let mut p = DMatrix::from_element(1, 1, 1.0);
        for &(e01, e10) in rates {
            for r in [e01, e10] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidProbability(r));
                }
            }
            let single = DMatrix::from_row_slice(2, 2, &[1.0 - e01, e10, e01, 1.0 - e10]);
            p = p.kronecker(&single);
        }
        Self::new(p)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Ratio of extreme singular values (infinite when singular).
    pub fn condition_number(&self) -> f64 {
        let sv = self.p.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in self.p.row_iter() {
            out.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(r);
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("'{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

fn rotate_into(state: &DensityMatrix, group: &BasisGroup) -> Result<DensityMatrix> {
    let s_dag = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, -1.0)];
    let mut rho = state.clone();
    for (&q, &p) in &group.basis {
        match p {
            Pauli::Z => {}
            Pauli::X => rho = rho.apply_unitary(&UnitaryGate::hadamard(q))?,
            Pauli::Y => {
                rho = rho.apply_unitary(&UnitaryGate::new(s_dag.to_vec(), vec![q])?)?;
                rho = rho.apply_unitary(&UnitaryGate::hadamard(q))?;
            }
        }
    }
    Ok(rho)
}

fn clean_probabilities(rho: &DensityMatrix) -> Vec<f64> {
    let mut probs: Vec<f64> = rho.probabilities().into_iter().map(|p| p.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Exact outcome distribution after rotating into the group basis.
pub fn basis_probabilities(state: &DensityMatrix, group: &BasisGroup) -> Result<CountsDistribution> {
    let rho = rotate_into(state, group)?;
    Ok(CountsDistribution { n_qubits: state.n_qubits(), values: clean_probabilities(&rho), shots: None, quasi: false })
}

fn multinomial<R: Rng + ?Sized>(weights: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    let dist = WeightedIndex::new(weights).map_err(|e| Error::InvalidArgument(format!("weights: {e}")))?;
    let mut counts = vec![0u64; weights.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts)
}

/// Draws `shots` outcomes in the group basis.
pub fn sample_counts<R: Rng + ?Sized>(
    state: &DensityMatrix,
    group: &BasisGroup,
    shots: u64,
    rng: &mut R,
) -> Result<CountsDistribution> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let probs = basis_probabilities(state, group)?;
    CountsDistribution::from_counts(state.n_qubits(), multinomial(&probs.values, shots, rng)?)
}

/// Readout noise: every count is resampled from its column of `P`;
/// probability vectors are multiplied by `P`.
pub fn apply_confusion<R: Rng + ?Sized>(
    dist: &CountsDistribution,
    p: &ConfusionMatrix,
    rng: &mut R,
) -> Result<CountsDistribution> {
    if dist.n_qubits != p.n_qubits {
        return Err(Error::DimensionMismatch { expected: p.n_qubits, actual: dist.n_qubits });
    }
    match dist.shots {
        Some(_) => {
            let d = dist.values.len();
            let mut counts = vec![0u64; d];
            for (j, &c) in dist.values.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let col: Vec<f64> = p.p.column(j).iter().copied().collect();
                for (k, n) in multinomial(&col, c as u64, rng)?.into_iter().enumerate() {
                    counts[k] += n;
                }
            }
            CountsDistribution::from_counts(dist.n_qubits, counts)
        }
        None => {
            let v = &p.p * nalgebra::DVector::from_column_slice(&dist.values);
            Ok(CountsDistribution { n_qubits: dist.n_qubits, values: v.as_slice().to_vec(), shots: None, quasi: dist.quasi })
        }
    }
}

/// `P^-1` applied to the normalized distribution; the result may have
/// negative entries.
pub fn mitigate(dist: &CountsDistribution, p: &ConfusionMatrix) -> Result<CountsDistribution> {
    if dist.n_qubits != p.n_qubits {
        return Err(Error::DimensionMismatch { expected: p.n_qubits, actual: dist.n_qubits });
    }
    let cond = p.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularMatrix(cond));
    }
    let v = nalgebra::DVector::from_vec(dist.normalized());
    let solved = p.p.clone().lu().solve(&v).ok_or(Error::SingularMatrix(f64::INFINITY))?;
    Ok(CountsDistribution { n_qubits: dist.n_qubits, values: solved.as_slice().to_vec(), shots: None, quasi: true })
}

/// Energy from one distribution per group (in `group_terms` order). Each
/// measured term is the parity of its qubits in the rotated basis.
pub fn energy_from_counts(h: &Hamiltonian, groups: &[BasisGroup], dists: &[CountsDistribution]) -> Result<f64> {
    if dists.len() < groups.len() {
        return Err(Error::MissingGroup(dists.len()));
    }
    let n = h.n_qubits();
    let mut e: f64 = h.terms().iter().filter(|t| t.is_identity()).map(|t| t.coefficient()).sum();
    for (g, dist) in groups.iter().zip(dists) {
        if dist.n_qubits != n {
            return Err(Error::DimensionMismatch { expected: n, actual: dist.n_qubits });
        }
        let freq = dist.normalized();
        for &ti in &g.terms {
            let t = &h.terms()[ti];
            let mask = t.support().fold(0usize, |m, q| m | 1 << (n - 1 - q));
            let parity: f64 = freq
                .iter()
                .enumerate()
                .map(|(s, &f)| if (s & mask).count_ones() % 2 == 0 { f } else { -f })
                .sum();
            e += t.coefficient() * parity;
        }
    }
    Ok(e)
}

/// How a state is turned into an energy estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetup {
    /// `None` uses exact basis probabilities.
    pub shots: Option<u64>,
    /// Readout confusion applied and then inverted.
    pub confusion: Option<ConfusionMatrix>,
}

impl Default for MeasurementSetup {
    fn default() -> Self {
        Self { shots: Some(DEFAULT_SHOTS), confusion: None }
    }
}

impl MeasurementSetup {
    pub fn exact() -> Self {
        Self { shots: None, confusion: None }
    }

    /// Measure every group, apply and mitigate readout noise, then assemble.
    pub fn estimate<R: Rng + ?Sized>(
        &self,
        state: &DensityMatrix,
        h: &Hamiltonian,
        groups: &[BasisGroup],
        rng: &mut R,
    ) -> Result<f64> {
        let dists = groups
            .iter()
            .map(|g| {
                let mut d = match self.shots {
                    Some(s) => sample_counts(state, g, s, rng)?,
                    None => basis_probabilities(state, g)?,
                };
                if let Some(p) = &self.confusion {
                    d = mitigate(&apply_confusion(&d, p, rng)?, p)?;
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        energy_from_counts(h, groups, &dists)
    }
}

/// One experiment epoch: estimate `E(θ)` and every shifted energy
/// `E(θ ± π/2 e_j)`, then `θ' = θ - lr ∇E`. Evaluation `k` draws from its
/// own stream of a seed taken from `rng`, so results do not depend on
/// evaluation order.
pub fn sampled_vqe_step<R: Rng + ?Sized>(
    layout: &CircuitLayout,
    params: &[f64],
    h: &Hamiltonian,
    noise: Option<&NoiseSpec>,
    setup: &MeasurementSetup,
    lr: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    layout.check_params(params)?;
    if h.n_qubits() != layout.n_qubits() {
        return Err(Error::DimensionMismatch { expected: layout.n_qubits(), actual: h.n_qubits() });
    }
    let groups = group_terms(h);
    let base: u64 = rng.gen();
    let eval = |k: u64, theta: &[f64]| -> Result<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(base);
        r.set_stream(k);
        setup.estimate(&execute(layout, theta, noise)?, h, &groups, &mut r)
    };
    let energy = eval(0, params)?;
    let mut shifted = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for j in 0..params.len() {
        shifted[j] = params[j] + FRAC_PI_2;
        let plus = eval(2 * j as u64 + 1, &shifted)?;
        shifted[j] = params[j] - FRAC_PI_2;
        let minus = eval(2 * j as u64 + 2, &shifted)?;
        shifted[j] = params[j];
        grad[j] = 0.5 * (plus - minus);
    }
    let next = params.iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
    Ok((next, energy))
}

/// Repeated [`sampled_vqe_step`]; returns the final parameters and the
/// energy estimate of every epoch.
pub fn sampled_vqe(
    layout: &CircuitLayout,
    start: Vec<f64>,
    h: &Hamiltonian,
    noise: Option<&NoiseSpec>,
    setup: &MeasurementSetup,
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = start;
    let mut trajectory = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (next, e) = sampled_vqe_step(layout, &params, h, noise, setup, lr, &mut rng)?;
        trajectory.push(e);
        params = next;
    }
    Ok((params, trajectory))
}
