//! Kraus noise channels and the gate-noise models built from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::densmat::C64;
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

const COMPLETENESS_TOL: f64 = 1e-10;
const PRUNE_NORM: f64 = 1e-14;

/// Sparse linear map on a `d x d` block, `out[o] += s * in[i]` for every
/// stored `(o, i, s)`; indices address the row-major flattened block.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    entries: Vec<(u8, u8, C64)>,
}

impl Transfer {
    fn build(dim: usize, operators: &[Vec<C64>], adjoint: bool) -> Self {
        let mut entries = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        let s: C64 = operators
                            .iter()
                            .map(|e| {
                                if adjoint {
                                    e[i * dim + a].conj() * e[j * dim + b]
                                } else {
                                    e[a * dim + i] * e[b * dim + j].conj()
                                }
                            })
                            .sum();
                        if s.norm() > 1e-15 {
                            entries.push(((a * dim + b) as u8, (i * dim + j) as u8, s));
                        }
                    }
                }
            }
        }
        Self { entries }
    }

    #[inline]
    pub fn entries(&self) -> &[(u8, u8, C64)] {
        &self.entries
    }
}

/// Completely positive trace-preserving map on one or two qubits.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    arity: usize,
    operators: Vec<Vec<C64>>,
    label: String,
    forward: Transfer,
    adjoint: Transfer,
}

impl PartialEq for KrausChannel {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.operators == other.operators
    }
}

impl fmt::Display for KrausChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}q, {} Kraus operators)", self.label, self.arity, self.operators.len())
    }
}

impl KrausChannel {
    /// Each operator is row-major with side `2^arity`; completeness
    /// `sum_k E_k^dagger E_k = I` is checked to 1e-10.
    pub fn new(arity: usize, operators: Vec<Vec<C64>>, label: impl Into<String>) -> Result<Self> {
        if !(1..=2).contains(&arity) {
            return Err(Error::InvalidArgument(format!("channel arity must be 1 or 2, got {arity}")));
        }
        if operators.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one Kraus operator".into()));
        }
        let d = 1 << arity;
        if let Some(bad) = operators.iter().find(|e| e.len() != d * d) {
            return Err(Error::DimensionMismatch { expected: d * d, actual: bad.len() });
        }
        let deviation = completeness_deviation(d, &operators);
        if deviation > COMPLETENESS_TOL {
            return Err(Error::IncompleteChannel(deviation));
        }
        let forward = Transfer::build(d, &operators, false);
        let adjoint = Transfer::build(d, &operators, true);
        Ok(Self { arity, operators, label: label.into(), forward, adjoint })
    }

    pub fn identity(arity: usize) -> Result<Self> {
        let d = 1 << arity;
        let mut id = vec![ZERO; d * d];
        for i in 0..d {
            id[i * d + i] = ONE;
        }
        Self::new(arity, vec![id], "identity")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn operators(&self) -> &[Vec<C64>] {
        &self.operators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn completeness_deviation(&self) -> f64 {
        completeness_deviation(1 << self.arity, &self.operators)
    }

    pub(crate) fn transfer(&self) -> &Transfer {
        &self.forward
    }

    /// Heisenberg-picture map `O -> sum_k E_k^dagger O E_k`.
    pub(crate) fn adjoint_transfer(&self) -> &Transfer {
        &self.adjoint
    }

    /// `then` applied after `self`: operators `{B_j A_i}`. Operators with
    /// Frobenius norm below 1e-14 are dropped.
    pub fn then(&self, then: &KrausChannel) -> Result<KrausChannel> {
        if self.arity != then.arity {
            return Err(Error::ArityMismatch { expected: self.arity, actual: then.arity });
        }
        let d = 1 << self.arity;
        let mut ops = Vec::new();
        for b in &then.operators {
            for a in &self.operators {
                let prod = matmul(d, b, a);
                let norm: f64 = prod.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if norm >= PRUNE_NORM {
                    ops.push(prod);
                }
            }
        }
        KrausChannel::new(self.arity, ops, format!("{} then {}", self.label, then.label))
    }

    /// Largest Frobenius distance of any operator from the nearest of
    /// `{I, 0}` -- zero for a channel whose only nonzero operator is `I`.
    pub fn distance_from_identity(&self) -> f64 {
        // Largest entry of S - 1 for the superoperator S.
        let d2 = 1usize << (2 * self.arity);
        let mut s = vec![ZERO; d2 * d2];
        for &(o, i, v) in &self.forward.entries {
            s[o as usize * d2 + i as usize] += v;
        }
        (0..d2 * d2)
            .map(|k| {
                let id = if k / d2 == k % d2 { ONE } else { ZERO };
                (s[k] - id).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn matmul(d: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    for r in 0..d {
        for m in 0..d {
            let x = a[r * d + m];
            if x == ZERO {
                continue;
            }
            for c in 0..d {
                out[r * d + c] += x * b[m * d + c];
            }
        }
    }
    out
}

fn completeness_deviation(d: usize, operators: &[Vec<C64>]) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..d {
        for c in 0..d {
            let mut acc = ZERO;
            for e in operators {
                for m in 0..d {
                    acc += e[m * d + r].conj() * e[m * d + c];
                }
            }
            let expect = if r == c { ONE } else { ZERO };
            worst = worst.max((acc - expect).norm());
        }
    }
    worst
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `K1 = diag(1, sqrt(1-p))`, `K2 = [[0, sqrt(p)], [0, 0]]`.
pub fn amplitude_damping(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let k1 = vec![ONE, ZERO, ZERO, r((1.0 - p).sqrt())];
    let k2 = vec![ZERO, r(p.sqrt()), ZERO, ZERO];
    KrausChannel::new(1, vec![k1, k2], format!("amplitude_damping({p})"))
}

/// `K1 = sqrt(1-p) I`, `K2 = sqrt(p) Z`; off-diagonals scale by `1 - 2p`.
pub fn dephasing(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let a = (1.0 - p).sqrt();
    let b = p.sqrt();
    let k1 = vec![r(a), ZERO, ZERO, r(a)];
    let k2 = vec![r(b), ZERO, ZERO, r(-b)];
    KrausChannel::new(1, vec![k1, k2], format!("dephasing({p})"))
}

/// Single-qubit depolarizing, `rho -> (1-p) rho + p I/2`.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let a = (1.0 - 0.75 * p).sqrt();
    let b = p.sqrt() / 2.0;
    let k1 = vec![r(a), ZERO, ZERO, r(a)];
    let kx = vec![ZERO, r(b), r(b), ZERO];
    let ky = vec![ZERO, C64::new(0.0, -b), C64::new(0.0, b), ZERO];
    let kz = vec![r(b), ZERO, ZERO, r(-b)];
    KrausChannel::new(1, vec![k1, kx, ky, kz], format!("depolarizing({p})"))
}

/// Two-qubit channel with operators `{E_a (x) E_b}` over all pairs, the
/// first factor acting on the first target qubit.
pub fn tensor_square(channel: &KrausChannel) -> Result<KrausChannel> {
    if channel.arity != 1 {
        return Err(Error::ArityMismatch { expected: 1, actual: channel.arity });
    }
    let mut ops = Vec::with_capacity(channel.operators.len().pow(2));
    for a in &channel.operators {
        for b in &channel.operators {
            let mut k = vec![ZERO; 16];
            for (ra, ca) in (0..2).flat_map(|x| (0..2).map(move |y| (x, y))) {
                for (rb, cb) in (0..2).flat_map(|x| (0..2).map(move |y| (x, y))) {
                    k[(2 * ra + rb) * 4 + 2 * ca + cb] = a[ra * 2 + ca] * b[rb * 2 + cb];
                }
            }
            ops.push(k);
        }
    }
    KrausChannel::new(2, ops, format!("{}^(x)2", channel.label))
}

/// Damping and dephasing probabilities for a gate of duration `t_gate_ns`
/// on a qubit with relaxation times `t1_us`, `t2_us`.
pub fn relaxation_probabilities(t1_us: f64, t2_us: f64, t_gate_ns: f64) -> Result<(f64, f64)> {
    if !(t1_us > 0.0 && t2_us > 0.0 && t_gate_ns >= 0.0) {
        return Err(Error::Unphysical(format!("T1={t1_us}, T2={t2_us}, t={t_gate_ns}")));
    }
    if t2_us > 2.0 * t1_us {
        return Err(Error::Unphysical(format!("T2={t2_us} exceeds 2*T1={}", 2.0 * t1_us)));
    }
    let t = t_gate_ns * 1e-3;
    let p_damping = 1.0 - (-t / t1_us).exp();
    let gamma = t / t2_us - t / (2.0 * t1_us);
    let p_dephasing = 0.5 * (1.0 - (-2.0 * gamma).exp());
    Ok((p_damping, p_dephasing.max(0.0)))
}

/// Dephasing followed by amplitude damping with probabilities from
/// [`relaxation_probabilities`].
pub fn thermal_relaxation(t1_us: f64, t2_us: f64, t_gate_ns: f64) -> Result<KrausChannel> {
    let (p_damp, p_deph) = relaxation_probabilities(t1_us, t2_us, t_gate_ns)?;
    let composed = dephasing(p_deph)?.then(&amplitude_damping(p_damp)?)?;
    Ok(KrausChannel { label: format!("thermal_relaxation(T1={t1_us}us, T2={t2_us}us, t={t_gate_ns}ns)"), ..composed })
}

/// Calibration averages for a device qubit pair.
///
/// Times: `t1`, `t2` in microseconds, gate durations in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub t1: f64,
    pub t2: f64,
    pub t_1q: f64,
    pub t_2q: f64,
    pub p_1q: f64,
    pub p_2q: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T1", self.t1), ("T2", self.t2), ("t_1q", self.t_1q), ("t_2q", self.t_2q)] {
            if !(v > 0.0) {
                return Err(Error::Unphysical(format!("{name} must be positive, got {v}")));
            }
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::Unphysical(format!("T2={} exceeds 2*T1={}", self.t2, 2.0 * self.t1)));
        }
        check_probability(self.p_1q)?;
        check_probability(self.p_2q)
    }
}

/// How an entry of the two-qubit noise list is applied to a CNOT's qubits.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoQubitNoise {
    /// Arity-2 channel on (control, target).
    Joint(KrausChannel),
    /// Arity-1 channel applied to control, then to target.
    PerQubit(KrausChannel),
}

impl TwoQubitNoise {
    pub fn channel(&self) -> &KrausChannel {
        match self {
            TwoQubitNoise::Joint(c) | TwoQubitNoise::PerQubit(c) => c,
        }
    }
}

/// Channels attached after every gate, keyed by gate arity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseSpec {
    single_qubit: Vec<KrausChannel>,
    two_qubit: Vec<TwoQubitNoise>,
    output_depolarizing: Option<f64>,
}

impl NoiseSpec {
    pub fn new(single_qubit: Vec<KrausChannel>, two_qubit: Vec<TwoQubitNoise>) -> Result<Self> {
        if let Some(c) = single_qubit.iter().find(|c| c.arity() != 1) {
            return Err(Error::ArityMismatch { expected: 1, actual: c.arity() });
        }
        for entry in &two_qubit {
            let (expected, c) = match entry {
                TwoQubitNoise::Joint(c) => (2, c),
                TwoQubitNoise::PerQubit(c) => (1, c),
            };
            if c.arity() != expected {
                return Err(Error::ArityMismatch { expected, actual: c.arity() });
            }
        }
        Ok(Self { single_qubit, two_qubit, output_depolarizing: None })
    }

    /// Noise-free spec; equivalent to passing no spec at all.
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// `channel` after every rotation and its tensor square after every CNOT.
    pub fn uniform(channel: KrausChannel) -> Result<Self> {
        let joint = tensor_square(&channel)?;
        Self::new(vec![channel], vec![TwoQubitNoise::Joint(joint)])
    }

    /// One whole-register depolarizing step on the circuit output, applied
    /// after all gate noise.
    pub fn with_output_depolarizing(mut self, eps: f64) -> Result<Self> {
        check_probability(eps)?;
        self.output_depolarizing = Some(eps);
        Ok(self)
    }

    pub fn single_qubit(&self) -> &[KrausChannel] {
        &self.single_qubit
    }

    pub fn two_qubit(&self) -> &[TwoQubitNoise] {
        &self.two_qubit
    }

    pub fn output_depolarizing(&self) -> Option<f64> {
        self.output_depolarizing
    }

    pub fn is_empty(&self) -> bool {
        self.single_qubit.is_empty() && self.two_qubit.is_empty() && self.output_depolarizing.is_none()
    }
}

/// Emulated superconducting-device noise: depolarizing then thermal
/// relaxation after 1q gates; tensor-product depolarizing then per-qubit
/// thermal relaxation after 2q gates. Depolarizing strengths are the
/// calibration error rates taken as-is.
pub fn ibm_device_noise(params: &DeviceParams) -> Result<NoiseSpec> {
    params.validate()?;
    let one = vec![depolarizing(params.p_1q)?, thermal_relaxation(params.t1, params.t2, params.t_1q)?];
    let two = vec![
        TwoQubitNoise::Joint(tensor_square(&depolarizing(params.p_2q)?)?),
        TwoQubitNoise::PerQubit(thermal_relaxation(params.t1, params.t2, params.t_2q)?),
    ];
    NoiseSpec::new(one, two)
}

/// Local noise families swept in the degradation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Damping,
    Dephasing,
    Depolarizing,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 3] = [NoiseFamily::Damping, NoiseFamily::Dephasing, NoiseFamily::Depolarizing];

    pub fn channel(self, p: f64) -> Result<KrausChannel> {
        match self {
            NoiseFamily::Damping => amplitude_damping(p),
            NoiseFamily::Dephasing => dephasing(p),
            NoiseFamily::Depolarizing => depolarizing(p),
        }
    }

    pub fn noise_spec(self, p: f64) -> Result<NoiseSpec> {
        NoiseSpec::uniform(self.channel(p)?)
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Damping => "damping",
            NoiseFamily::Dephasing => "dephasing",
            NoiseFamily::Depolarizing => "depolarizing",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "damping" | "amplitude_damping" => Ok(NoiseFamily::Damping),
            "dephasing" => Ok(NoiseFamily::Dephasing),
            "depolarizing" => Ok(NoiseFamily::Depolarizing),
            other => Err(Error::InvalidArgument(format!("unknown noise family '{other}'"))),
        }
    }
}
