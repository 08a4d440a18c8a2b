//! Product-state (mean-field) baseline.
//!
//! Each site holds `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>`, whose Bloch vector is
//! `(sinθ cosφ, sinθ sinφ, cosθ)`. A term's energy is the product of the
//! per-site Pauli expectations.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densmat::{DensityMatrix, C64};
use crate::error::{Error, Result};
use crate::hamiltonians::{Hamiltonian, Pauli};
use crate::vqe::{stream_rng, Optimizer, Stepper};

/// Polar and azimuthal angle per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl BlochAngles {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::DimensionMismatch { expected: theta.len(), actual: phi.len() });
        }
        Ok(Self { theta, phi })
    }

    pub fn uniform(n_sites: usize, theta: f64, phi: f64) -> Self {
        Self { theta: vec![theta; n_sites], phi: vec![phi; n_sites] }
    }

    pub fn n_sites(&self) -> usize {
        self.theta.len()
    }

    /// Maps every site onto `θ ∈ [0, π]`, `φ ∈ [0, 2π)` without moving the state.
    pub fn wrapped(&self) -> Self {
        let mut out = self.clone();
        for (t, f) in out.theta.iter_mut().zip(out.phi.iter_mut()) {
            let mut th = t.rem_euclid(TAU);
            if th > PI {
                th = TAU - th;
                *f += PI;
            }
            *t = th;
            *f = f.rem_euclid(TAU);
        }
        out
    }

    /// The product state as a density matrix; site 0 is the leftmost factor.
    pub fn product_state(&self) -> Result<DensityMatrix> {
        let mut amps = vec![C64::new(1.0, 0.0)];
        for (&t, &f) in self.theta.iter().zip(&self.phi) {
            let a0 = C64::new((t / 2.0).cos(), 0.0);
            let a1 = C64::from_polar((t / 2.0).sin(), f);
            amps = amps.iter().flat_map(|&a| [a * a0, a * a1]).collect();
        }
        DensityMatrix::from_pure(&amps)
    }
}

fn bloch(p: Pauli, theta: f64, phi: f64) -> f64 {
    match p {
        Pauli::X => theta.sin() * phi.cos(),
        Pauli::Y => theta.sin() * phi.sin(),
        Pauli::Z => theta.cos(),
    }
}

fn bloch_dtheta(p: Pauli, theta: f64, phi: f64) -> f64 {
    match p {
        Pauli::X => theta.cos() * phi.cos(),
        Pauli::Y => theta.cos() * phi.sin(),
        Pauli::Z => -theta.sin(),
    }
}

fn bloch_dphi(p: Pauli, theta: f64, phi: f64) -> f64 {
    match p {
        Pauli::X => -theta.sin() * phi.sin(),
        Pauli::Y => theta.sin() * phi.cos(),
        Pauli::Z => 0.0,
    }
}

fn check(h: &Hamiltonian, angles: &BlochAngles) -> Result<()> {
    if angles.theta.len() != h.n_qubits() || angles.phi.len() != h.n_qubits() {
        return Err(Error::DimensionMismatch { expected: h.n_qubits(), actual: angles.theta.len() });
    }
    if let Some(t) = h.terms().iter().find(|t| t.weight() > 2) {
        return Err(Error::InvalidArgument(format!("term acts on {} sites; mean field needs at most 2", t.weight())));
    }
    Ok(())
}

pub fn mf_energy(h: &Hamiltonian, angles: &BlochAngles) -> Result<f64> {
    check(h, angles)?;
    Ok(h.terms()
        .iter()
        .map(|t| {
            t.coefficient()
                * t.paulis().iter().map(|(&q, &p)| bloch(p, angles.theta[q], angles.phi[q])).product::<f64>()
        })
        .sum())
}

/// Gradient laid out as `[∂θ_0, ∂φ_0, ∂θ_1, ∂φ_1, ...]`.
pub fn mf_gradient(h: &Hamiltonian, angles: &BlochAngles) -> Result<Vec<f64>> {
    check(h, angles)?;
    let mut grad = vec![0.0; 2 * h.n_qubits()];
    for t in h.terms() {
        let factors: Vec<(usize, Pauli, f64)> = t
            .paulis()
            .iter()
            .map(|(&q, &p)| (q, p, bloch(p, angles.theta[q], angles.phi[q])))
            .collect();
        for (k, &(q, p, _)) in factors.iter().enumerate() {
            let rest: f64 = factors.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, f)| f.2).product();
            let (th, ph) = (angles.theta[q], angles.phi[q]);
            grad[2 * q] += t.coefficient() * rest * bloch_dtheta(p, th, ph);
            grad[2 * q + 1] += t.coefficient() * rest * bloch_dphi(p, th, ph);
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldResult {
    pub energy: f64,
    pub angles: BlochAngles,
}

pub const DEFAULT_RESTARTS: usize = 20;
const MF_ITERATIONS: usize = 3000;
const MF_TOLERANCE: f64 = 1e-12;

fn descend(h: &Hamiltonian, start: BlochAngles) -> Result<MeanFieldResult> {
    let n = start.n_sites();
    let mut x: Vec<f64> = (0..n).flat_map(|i| [start.theta[i], start.phi[i]]).collect();
    let unpack = |x: &[f64]| BlochAngles {
        theta: x.iter().step_by(2).copied().collect(),
        phi: x.iter().skip(1).step_by(2).copied().collect(),
    };
    let mut stepper = Stepper::new(Optimizer::adam(), 0.05, x.len());
    let mut prev = f64::INFINITY;
    let mut calm = 0;
    for _ in 0..MF_ITERATIONS {
        let angles = unpack(&x);
        let e = mf_energy(h, &angles)?;
        calm = if (e - prev).abs() < MF_TOLERANCE { calm + 1 } else { 0 };
        if calm >= 10 {
            break;
        }
        prev = e;
        stepper.step(&mut x, &mf_gradient(h, &angles)?);
    }
    let angles = unpack(&x).wrapped();
    Ok(MeanFieldResult { energy: mf_energy(h, &angles)?, angles })
}

/// Adam from `restarts` random product states; returns the lowest energy.
pub fn mf_optimize(h: &Hamiltonian, restarts: usize, seed: u64) -> Result<MeanFieldResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be positive".into()));
    }
    let n = h.n_qubits();
    check(h, &BlochAngles::uniform(n, 0.0, 0.0))?;
    let runs: Vec<MeanFieldResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r, 0);
            let theta = (0..n).map(|_| rng.gen_range(0.0..PI)).collect();
            let phi = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
            descend(h, BlochAngles { theta, phi })
        })
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().min_by(|a, b| a.energy.total_cmp(&b.energy)).expect("restarts > 0"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{heisenberg, t_heisenberg, tfim, PauliTerm};

    /// Exhaustive search: polar angles at resolution π/200, azimuths at π/8.
    fn grid_oracle_two_sites(h: &Hamiltonian) -> f64 {
        let th: Vec<f64> = (0..=200).map(|i| PI * i as f64 / 200.0).collect();
        let ph: Vec<f64> = (0..16).map(|i| PI * i as f64 / 8.0).collect();
        let mut a = BlochAngles::uniform(2, 0.0, 0.0);
        let mut best = f64::INFINITY;
        for &f0 in &ph {
            for &f1 in &ph {
                a.phi = vec![f0, f1];
                for &t0 in &th {
                    for &t1 in &th {
                        a.theta[0] = t0;
                        a.theta[1] = t1;
                        best = best.min(mf_energy(h, &a).unwrap());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn closed_form_example() {
        let h = tfim(2, 1.0, 1.0).unwrap();
        let e = mf_energy(&h, &BlochAngles::uniform(2, PI, 0.0)).unwrap();
        assert!((e + 2.0).abs() < 1e-12);
    }

    #[test]
    fn antiparallel_heisenberg_pair() {
        let h = heisenberg(2).unwrap();
        let a = BlochAngles::new(vec![0.7, PI - 0.7], vec![0.3, 0.3 + PI]).unwrap();
        assert!((mf_energy(&h, &a).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimizer_matches_grid_oracle() {
        for (h, expect) in [
            (tfim(2, 1.0, 1.0).unwrap(), -2.0),
            (heisenberg(2).unwrap(), -1.0),
            (t_heisenberg(2, 1.0, 1.0).unwrap(), -1.5),
        ] {
            let oracle = grid_oracle_two_sites(&h);
            assert!((oracle - expect).abs() < 1e-3, "oracle {oracle}");
            let r = mf_optimize(&h, DEFAULT_RESTARTS, 11).unwrap();
            assert!((r.energy - oracle).abs() < 1e-3, "{} vs {oracle}", r.energy);
            assert!(r.energy >= h.exact_ground_energy().unwrap() - 1e-9);
        }
    }

    #[test]
    fn agrees_with_product_density_matrix() {
        let h = t_heisenberg(4, 0.8, 1.3).unwrap();
        let a = BlochAngles::new(vec![0.1, 1.2, 2.3, 3.0], vec![5.0, 0.4, 2.2, 1.1]).unwrap();
        let rho = a.product_state().unwrap();
        assert!((mf_energy(&h, &a).unwrap() - rho.expectation(&h).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn z_only_gradient_vanishes_at_pole() {
        let h = Hamiltonian::new(
            2,
            vec![PauliTerm::new(1.0, [(0, Pauli::Z)]).unwrap(), PauliTerm::new(0.5, [(0, Pauli::Z), (1, Pauli::Z)]).unwrap()],
        )
        .unwrap();
        let g = mf_gradient(&h, &BlochAngles::uniform(2, 0.0, 0.0)).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn wrapping_preserves_state() {
        let a = BlochAngles::new(vec![4.0, -1.0], vec![0.5, 7.0]).unwrap();
        let w = a.wrapped();
        assert!(w.theta.iter().all(|t| (0.0..=PI).contains(t)));
        assert!(w.phi.iter().all(|f| (0.0..TAU).contains(f)));
        assert!(a.product_state().unwrap().max_abs_diff(&w.product_state().unwrap()) < 1e-12);
    }

    #[test]
    fn rejects_three_site_terms() {
        let h = Hamiltonian::new(3, vec![PauliTerm::new(1.0, [(0, Pauli::Z), (1, Pauli::Z), (2, Pauli::Z)]).unwrap()])
            .unwrap();
        assert!(mf_energy(&h, &BlochAngles::uniform(3, 0.0, 0.0)).is_err());
        assert!(mf_optimize(&h, 2, 0).is_err());
    }
}
