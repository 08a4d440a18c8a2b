//! Post-processing: relative energies, exponential fits, mean-field
//! crossover and the depolarizing-accumulation model.

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_layout, Slot};
use crate::channels::NoiseFamily;
use crate::error::{Error, Result};
use crate::vqe::{optimize_at, VqeConfig};

/// `(E - E0) / |E0|`.
pub fn relative_energy(e: f64, e0: f64) -> Result<f64> {
    if e0 == 0.0 {
        return Err(Error::InvalidArgument("reference energy is zero".into()));
    }
    Ok((e - e0) / e0.abs())
}

/// `E(p) = amplitude * exp(rate * p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub amplitude: f64,
    pub rate: f64,
    pub residual_norm: f64,
}

impl FitParams {
    pub fn eval(&self, p: f64) -> f64 {
        self.amplitude * (self.rate * p).exp()
    }
}

fn residual_norm(points: &[(f64, f64)], amplitude: f64, rate: f64) -> f64 {
    points.iter().map(|&(p, e)| (amplitude * (rate * p).exp() - e).powi(2)).sum::<f64>().sqrt()
}

/// Least-squares fit of `E(p) = B exp(a p)`.
///
/// Starts from a log-linear regression on `|E|` and refines with
/// Levenberg-Marquardt on the untransformed residuals.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<FitParams> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points, got {}", points.len())));
    }
    for (i, a) in points.iter().enumerate() {
        if !a.0.is_finite() || !a.1.is_finite() {
            return Err(Error::InvalidArgument("non-finite data point".into()));
        }
        if points[i + 1..].iter().any(|b| b.0 == a.0) {
            return Err(Error::InvalidArgument(format!("duplicate abscissa {}", a.0)));
        }
    }
    let sign = points[0].1.signum();
    if points.iter().any(|&(_, e)| e == 0.0 || e.signum() != sign) {
        return Err(Error::InvalidArgument("energies must be nonzero and share one sign".into()));
    }

    // log|E| = log|B| + a p
    let m = points.len() as f64;
    let mx = points.iter().map(|q| q.0).sum::<f64>() / m;
    let my = points.iter().map(|q| q.1.abs().ln()).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|q| (q.0 - mx) * (q.1.abs().ln() - my)).sum();
    let mut rate = sxy / sxx;
    let mut amplitude = sign * (my - rate * mx).exp();

    let mut cost = residual_norm(points, amplitude, rate).powi(2);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        // Normal equations J^T J d = -J^T r.
        let (mut jbb, mut jba, mut jaa, mut gb, mut ga) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(p, e) in points {
            let ex = (rate * p).exp();
            let r = amplitude * ex - e;
            let db = ex;
            let da = amplitude * p * ex;
            jbb += db * db;
            jba += db * da;
            jaa += da * da;
            gb += db * r;
            ga += da * r;
        }
        if gb.abs() + ga.abs() < 1e-15 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let a11 = jbb * (1.0 + lambda);
            let a22 = jaa * (1.0 + lambda);
            let det = a11 * a22 - jba * jba;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let d_b = (-gb * a22 + ga * jba) / det;
            let d_a = (-ga * a11 + gb * jba) / det;
            let trial = residual_norm(points, amplitude + d_b, rate + d_a).powi(2);
            if trial < cost {
                amplitude += d_b;
                rate += d_a;
                let gain = cost - trial;
                cost = trial;
                lambda = (lambda / 10.0).max(1e-12);
                improved = gain > 1e-30;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(FitParams { amplitude, rate, residual_norm: cost.sqrt() })
}

/// Noise probability where the fitted energy curve meets `e_mf`:
/// `p* = ln(e_mf / B) / a`, required to lie in `(0, 1)`.
pub fn crossover_probability(fit: &FitParams, e_mf: f64) -> Result<f64> {
    let ratio = e_mf / fit.amplitude;
    if fit.rate == 0.0 || !(ratio > 0.0) {
        return Err(Error::NoCrossing);
    }
    let p = ratio.ln() / fit.rate;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::NoCrossing)
    }
}

/// `1 - (1 - p)^d`.
pub fn global_epsilon(p: f64, depth: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(1.0 - (1.0 - p).powi(depth as i32))
}

/// `(1 - eps) E0 + eps Tr(H) / 2^n`.
pub fn accumulated_energy(e0: f64, eps: f64, trace_h: f64, n_qubits: usize) -> f64 {
    (1.0 - eps) * e0 + eps * trace_h / (1u64 << n_qubits) as f64
}

/// Exponent used for the analytic global depolarizing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveDepth {
    /// Logical ansatz depth.
    #[default]
    Logical,
    /// Largest number of gates acting on any single qubit.
    GateCount,
}

impl EffectiveDepth {
    pub fn exponent(self, n_qubits: usize, depth: usize) -> Result<u32> {
        match self {
            EffectiveDepth::Logical => Ok(depth as u32),
            EffectiveDepth::GateCount => {
                let layout = build_layout(n_qubits, depth)?;
                let mut per_qubit = vec![0u32; n_qubits];
                for slot in layout.slots() {
                    match *slot {
                        Slot::Rotation { qubit, .. } => per_qubit[qubit] += 1,
                        Slot::Cnot { control, target } => {
                            per_qubit[control] += 1;
                            per_qubit[target] += 1;
                        }
                    }
                }
                Ok(per_qubit.into_iter().max().unwrap_or(0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccumulationRow {
    pub depth: usize,
    pub p: f64,
    pub epsilon_fit: f64,
    pub epsilon_analytic: f64,
    pub energy_sim: f64,
    pub energy_accum: f64,
    pub e0: f64,
}

/// Depolarizing VQE at every depth, comparing the global parameter implied
/// by the optimized energy (`1 - E_sim / E0`) with `1 - (1 - p)^d`.
/// `E_sim` is the best energy over the configured restarts.
pub fn accumulation_curve(
    config: &VqeConfig,
    depths: &[usize],
    p: f64,
    effective: EffectiveDepth,
) -> Result<Vec<AccumulationRow>> {
    let h = &config.hamiltonian;
    if h.trace().abs() > 1e-12 {
        return Err(Error::InvalidArgument("accumulation model assumes a traceless Hamiltonian".into()));
    }
    let n = h.n_qubits();
    let e0 = h.exact_ground_energy()?;
    let noise = NoiseFamily::Depolarizing.noise_spec(p)?;
    depths
        .iter()
        .enumerate()
        .map(|(gi, &depth)| {
            let cfg = VqeConfig { depth, noise: Some(noise.clone()), warm_start: None, ..config.clone() };
            let res = optimize_at(&cfg, gi)?;
            let eps_analytic = global_epsilon(p, effective.exponent(n, depth)?)?;
            Ok(AccumulationRow {
                depth,
                p,
                epsilon_fit: 1.0 - res.best_energy / e0,
                epsilon_analytic: eps_analytic,
                energy_sim: res.best_energy,
                energy_accum: accumulated_energy(e0, eps_analytic, 0.0, n),
                e0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthRow {
    pub depth: usize,
    pub family: NoiseFamily,
    pub p: f64,
    pub energy: f64,
    pub rel_energy: f64,
}

/// Mean relative energy per depth under a single noise family.
pub fn non_accumulation_check(
    config: &VqeConfig,
    family: NoiseFamily,
    p: f64,
    depths: &[usize],
) -> Result<Vec<DepthRow>> {
    let e0 = config.hamiltonian.exact_ground_energy()?;
    let noise = family.noise_spec(p)?;
    depths
        .iter()
        .enumerate()
        .map(|(gi, &depth)| {
            let cfg = VqeConfig { depth, noise: Some(noise.clone()), warm_start: None, ..config.clone() };
            let res = optimize_at(&cfg, gi)?;
            let energy = res.mean_energy();
            Ok(DepthRow { depth, family, p, energy, rel_energy: relative_energy(energy, e0)? })
        })
        .collect()
}
