//! Variational loop: energies, parameter-shift gradients, optimizers and
//! restart/sweep drivers.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::relative_energy;
use crate::ansatz::{
    apply_gate, apply_gate_adjoint, apply_gate_noise, apply_gate_noise_adjoint, build_layout, execute,
    CircuitLayout, ParameterVector, Slot,
};
use crate::channels::{NoiseFamily, NoiseSpec};
use crate::densmat::{qubit_mask, DensityMatrix, Operator, C64};
use crate::error::{Error, Result};
use crate::hamiltonians::Hamiltonian;

/// Seeded generator for one (grid point, restart) pair.
pub fn stream_rng(seed: u64, restart: usize, grid_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid_index as u64) << 32) | restart as u64);
    rng
}

fn check_dims(layout: &CircuitLayout, h: &Hamiltonian) -> Result<()> {
    if layout.n_qubits() != h.n_qubits() {
        return Err(Error::DimensionMismatch { expected: layout.n_qubits(), actual: h.n_qubits() });
    }
    Ok(())
}

/// `Tr(H rho(theta))`.
pub fn energy(layout: &CircuitLayout, params: &[f64], h: &Hamiltonian, noise: Option<&NoiseSpec>) -> Result<f64> {
    check_dims(layout, h)?;
    execute(layout, params, noise)?.expectation(h)
}

/// Parameter-shift gradient by re-running the full circuit at `theta +- pi/2`
/// for every component.
pub fn gradient_parameter_shift_naive(
    layout: &CircuitLayout,
    params: &[f64],
    h: &Hamiltonian,
    noise: Option<&NoiseSpec>,
) -> Result<Vec<f64>> {
    check_dims(layout, h)?;
    layout.check_params(params)?;
    let mut shifted = params.to_vec();
    (0..params.len())
        .map(|j| {
            shifted[j] = params[j] + FRAC_PI_2;
            let plus = energy(layout, &shifted, h, noise)?;
            shifted[j] = params[j] - FRAC_PI_2;
            let minus = energy(layout, &shifted, h, noise)?;
            shifted[j] = params[j];
            Ok((plus - minus) / 2.0)
        })
        .collect()
}

/// Parameter-shift gradient, component `j = (E(theta + pi/2 e_j) - E(theta - pi/2 e_j)) / 2`.
pub fn gradient_parameter_shift(
    layout: &CircuitLayout,
    params: &[f64],
    h: &Hamiltonian,
    noise: Option<&NoiseSpec>,
) -> Result<Vec<f64>> {
    Ok(energy_and_gradient(layout, params, h, noise)?.1)
}

/// Energy at `theta` together with its parameter-shift gradient.
///
/// The shifted circuits share every gate except the shifted rotation, so the
/// state just before each rotation is kept from one forward sweep and the
/// observable is carried backwards through the remaining gates and channels
/// (Heisenberg picture). Each shifted energy is then `Tr(B_k R rho_k R^dagger)`.
pub fn energy_and_gradient(
    layout: &CircuitLayout,
    params: &[f64],
    h: &Hamiltonian,
    noise: Option<&NoiseSpec>,
) -> Result<(f64, Vec<f64>)> {
    check_dims(layout, h)?;
    layout.check_params(params)?;
    let n = layout.n_qubits();
    let noise = noise.filter(|ns| !ns.is_empty());

    let mut state = DensityMatrix::ground_state(n)?;
    let op = state.op_mut();
    let mut before_rotation: Vec<Operator> = Vec::with_capacity(layout.n_params());
    for slot in layout.slots() {
        if matches!(slot, Slot::Rotation { .. }) {
            before_rotation.push(op.clone());
        }
        apply_gate(op, slot, params);
        if let Some(ns) = noise {
            apply_gate_noise(op, slot, ns);
        }
    }
    let out_eps = noise.and_then(|ns| ns.output_depolarizing());
    if let Some(eps) = out_eps {
        op.depolarize_globally(eps);
    }
    let e = h.expectation_of(op).re;

    let mut observable = h.to_operator();
    if let Some(eps) = out_eps {
        // The global depolarizer is self-adjoint.
        observable.depolarize_globally(eps);
    }
    let mut grad = vec![0.0; params.len()];
    for slot in layout.slots().iter().rev() {
        if let Some(ns) = noise {
            apply_gate_noise_adjoint(&mut observable, slot, ns);
        }
        if let Slot::Rotation { axis, qubit, param } = *slot {
            let rho = before_rotation.pop().expect("one snapshot per rotation");
            let response = rotation_response(&observable, &rho, n, qubit);
            let plus = response.evaluate(&axis.rotation(params[param] + FRAC_PI_2));
            let minus = response.evaluate(&axis.rotation(params[param] - FRAC_PI_2));
            grad[param] = (plus - minus) / 2.0;
        }
        apply_gate_adjoint(&mut observable, slot, params);
    }
    Ok((e, grad))
}

/// Bilinear form `U -> Tr(B U rho U^dagger)` for a single-qubit `U` on `qubit`.
struct RotationResponse([C64; 16]);

impl RotationResponse {
    fn evaluate(&self, u: &[C64; 4]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for d in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        acc += self.0[((d * 2 + a) * 2 + b) * 2 + c] * u[a * 2 + b] * u[d * 2 + c].conj();
                    }
                }
            }
        }
        acc.re
    }
}

fn rotation_response(observable: &Operator, rho: &Operator, n: usize, qubit: usize) -> RotationResponse {
    let dim = 1 << n;
    let m = qubit_mask(n, qubit);
    let mut k = [C64::new(0.0, 0.0); 16];
    let bases: Vec<usize> = (0..dim).filter(|i| i & m == 0).collect();
    for &x in &bases {
        for &y in &bases {
            let r = [
                rho.get(x, y),
                rho.get(x, y | m),
                rho.get(x | m, y),
                rho.get(x | m, y | m),
            ];
            let b = [
                observable.get(y, x),
                observable.get(y, x | m),
                observable.get(y | m, x),
                observable.get(y | m, x | m),
            ];
            for (da, bv) in b.iter().enumerate() {
                for (bc, rv) in r.iter().enumerate() {
                    k[da * 4 + bc] += bv * rv;
                }
            }
        }
    }
    RotationResponse(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    /// `theta <- theta - lr * grad`.
    Gd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

/// Optimizer state for one run.
#[derive(Debug, Clone)]
pub struct Stepper {
    optimizer: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Stepper {
    pub fn new(optimizer: Optimizer, lr: f64, n_params: usize) -> Self {
        Self { optimizer, lr, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match self.optimizer {
            Optimizer::Gd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct VqeConfig {
    pub hamiltonian: Hamiltonian,
    pub depth: usize,
    pub noise: Option<NoiseSpec>,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once `|dE|` stays below this for `patience` consecutive steps.
    pub tolerance: f64,
    pub patience: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Starting point for restart 0; further restarts draw uniformly.
    pub warm_start: Option<Vec<f64>>,
}

impl VqeConfig {
    /// Adam, lr 0.05, 2000 iterations, `|dE| < 1e-6` for 10 steps, 3 restarts.
    pub fn new(hamiltonian: Hamiltonian, depth: usize) -> Self {
        Self {
            hamiltonian,
            depth,
            noise: None,
            optimizer: Optimizer::adam(),
            learning_rate: 0.05,
            max_iterations: 2000,
            tolerance: 1e-6,
            patience: 10,
            restarts: 3,
            seed: 0,
            warm_start: None,
        }
    }

    pub fn with_noise(mut self, noise: Option<NoiseSpec>) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer, learning_rate: f64) -> Self {
        self.optimizer = optimizer;
        self.learning_rate = learning_rate;
        self
    }

    pub fn with_warm_start(mut self, params: Option<Vec<f64>>) -> Self {
        self.warm_start = params;
        self
    }

    pub fn validate(&self) -> Result<CircuitLayout> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.max_iterations < 1 || self.restarts < 1 {
            return Err(Error::InvalidArgument("max_iterations and restarts must be at least 1".into()));
        }
        let layout = build_layout(self.hamiltonian.n_qubits(), self.depth)?;
        if let Some(w) = &self.warm_start {
            layout.check_params(w)?;
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub final_energy: f64,
    pub params: ParameterVector,
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeResult {
    pub best_energy: f64,
    pub best_params: ParameterVector,
    pub restarts: Vec<RestartOutcome>,
}

impl VqeResult {
    pub fn final_energies(&self) -> Vec<f64> {
        self.restarts.iter().map(|r| r.final_energy).collect()
    }

    pub fn mean_energy(&self) -> f64 {
        self.restarts.iter().map(|r| r.final_energy).sum::<f64>() / self.restarts.len() as f64
    }
}

/// Gradient descent from `start`; the trajectory holds `E(theta_t)` per step
/// plus the final energy.
pub fn run_from(
    layout: &CircuitLayout,
    config: &VqeConfig,
    start: Vec<f64>,
) -> Result<RestartOutcome> {
    let h = &config.hamiltonian;
    let noise = config.noise.as_ref();
    let mut params = start;
    let mut stepper = Stepper::new(config.optimizer, config.learning_rate, params.len());
    let mut trajectory: Vec<f64> = Vec::with_capacity(config.max_iterations + 1);
    let mut calm = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let (e, grad) = energy_and_gradient(layout, &params, h, noise)?;
        if let Some(&prev) = trajectory.last() {
            if (e - prev).abs() < config.tolerance {
                calm += 1;
            } else {
                calm = 0;
            }
        }
        trajectory.push(e);
        if calm >= config.patience {
            converged = true;
            break;
        }
        stepper.step(&mut params, &grad);
        iterations += 1;
    }
    let final_energy = if converged {
        *trajectory.last().unwrap()
    } else {
        let e = energy(layout, &params, h, noise)?;
        trajectory.push(e);
        e
    };
    for p in &mut params {
        *p = p.rem_euclid(TAU);
    }
    Ok(RestartOutcome { final_energy, params: params.into(), trajectory, iterations, converged })
}

/// All restarts for one grid point; restart `r` draws its initial parameters
/// from `stream_rng(seed, r, grid_index)`.
pub fn optimize_at(config: &VqeConfig, grid_index: usize) -> Result<VqeResult> {
    let layout = config.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (&config.warm_start, r) {
                (Some(w), 0) => w.clone(),
                _ => {
                    let mut rng = stream_rng(config.seed, r, grid_index);
                    let dist = Uniform::new(0.0, TAU);
                    (0..layout.n_params()).map(|_| dist.sample(&mut rng)).collect()
                }
            };
            run_from(&layout, config, start)
        })
        .collect::<Result<_>>()?;
    let best = outcomes
        .iter()
        .min_by(|a, b| a.final_energy.total_cmp(&b.final_energy))
        .expect("at least one restart");
    Ok(VqeResult { best_energy: best.final_energy, best_params: best.params.clone(), restarts: outcomes })
}

pub fn optimize(config: &VqeConfig) -> Result<VqeResult> {
    optimize_at(config, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub depth: usize,
    pub family: NoiseFamily,
    pub p: f64,
    pub restart: usize,
    pub energy: f64,
    pub e0: f64,
    pub rel_energy: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// Optimizes at every `(depth, p)` with `family` noise on all gates (1q
/// channel after rotations, its tensor square after CNOTs). Rows follow grid
/// order: depth-major, then `p`, then restart.
pub fn noise_sweep(
    config: &VqeConfig,
    family: NoiseFamily,
    probabilities: &[f64],
    depths: &[usize],
) -> Result<Vec<SweepRow>> {
    let e0 = config.hamiltonian.exact_ground_energy()?;
    let grid: Vec<(usize, f64)> = depths.iter().flat_map(|&d| probabilities.iter().map(move |&p| (d, p))).collect();
    let results: Vec<Vec<SweepRow>> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, &(depth, p))| {
            let cfg = VqeConfig { depth, noise: Some(family.noise_spec(p)?), warm_start: None, ..config.clone() };
            let res = optimize_at(&cfg, gi)?;
            res.restarts
                .iter()
                .enumerate()
                .map(|(r, out)| {
                    Ok(SweepRow {
                        depth,
                        family,
                        p,
                        restart: r,
                        energy: out.final_energy,
                        e0,
                        rel_energy: relative_energy(out.final_energy, e0)?,
                        iterations: out.iterations,
                        seed: config.seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Mean relative energy per `(depth, p)` in grid order.
pub fn sweep_means(rows: &[SweepRow]) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64, usize)> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|(d, p, _, _)| *d == row.depth && *p == row.p) {
            Some(entry) => {
                entry.2 += row.rel_energy;
                entry.3 += 1;
            }
            None => out.push((row.depth, row.p, row.rel_energy, 1)),
        }
    }
    out.into_iter().map(|(d, p, s, c)| (d, p, s / c as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping, depolarizing, thermal_relaxation, tensor_square, TwoQubitNoise};
    use crate::hamiltonians::{heisenberg, tfim, Pauli, PauliTerm};

    #[test]
    fn zero_parameters_tfim_energy() {
        let layout = build_layout(2, 1).unwrap();
        let h = tfim(2, 1.0, 1.0).unwrap();
        assert!((energy(&layout, &[0.0; 4], &h, None).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_rotation_gradient_toy() {
        // Ry(theta) on qubit 0 of a 2-qubit register with H = Z0: E = cos(theta).
        let layout = build_layout(2, 1).unwrap();
        let h = Hamiltonian::new(2, vec![PauliTerm::new(1.0, [(0, Pauli::Z)]).unwrap()]).unwrap();
        for theta in [0.0, FRAC_PI_2, 1.234] {
            let params = [theta, 0.0, 0.0, 0.0];
            let g = gradient_parameter_shift(&layout, &params, &h, None).unwrap();
            assert!((g[0] + theta.sin()).abs() < 1e-12, "theta={theta}: {}", g[0]);
        }
        let g = gradient_parameter_shift(&layout, &[FRAC_PI_2, 0.0, 0.0, 0.0], &h, None).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_sweep_matches_naive_shift() {
        let h = heisenberg(4).unwrap();
        let layout = build_layout(4, 2).unwrap();
        let params: Vec<f64> = (0..layout.n_params()).map(|i| (i as f64 * 0.731).sin() * 3.0).collect();
        let noise = crate::channels::NoiseSpec::new(
            vec![depolarizing(0.01).unwrap(), thermal_relaxation(50.0, 40.0, 100.0).unwrap()],
            vec![
                TwoQubitNoise::Joint(tensor_square(&amplitude_damping(0.02).unwrap()).unwrap()),
                TwoQubitNoise::PerQubit(thermal_relaxation(50.0, 40.0, 300.0).unwrap()),
            ],
        )
        .unwrap()
        .with_output_depolarizing(0.03)
        .unwrap();
        for ns in [None, Some(&noise)] {
            let (e, fast) = energy_and_gradient(&layout, &params, &h, ns).unwrap();
            let slow = gradient_parameter_shift_naive(&layout, &params, &h, ns).unwrap();
            assert!((e - energy(&layout, &params, &h, ns).unwrap()).abs() < 1e-12);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-11, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let layout = build_layout(2, 1).unwrap();
        let h = tfim(4, 1.0, 1.0).unwrap();
        assert!(matches!(energy(&layout, &[0.0; 4], &h, None), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            gradient_parameter_shift(&layout, &[0.0; 4], &h, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tfim_two_qubits_converges() {
        let h = tfim(2, 1.0, 1.0).unwrap();
        let e0 = h.exact_ground_energy().unwrap();
        let res = optimize(&VqeConfig::new(h, 1).with_seed(7)).unwrap();
        assert!(res.best_energy / e0 >= 0.98, "{}", res.best_energy);
        assert!(res.best_energy >= e0 - 1e-9);
        assert_eq!(res.restarts.len(), 3);
        let min = res.final_energies().into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(min, res.best_energy);
    }

    #[test]
    fn optimize_is_deterministic() {
        let h = tfim(2, 1.0, 1.0).unwrap();
        let cfg = VqeConfig::new(h, 1).with_seed(11).with_max_iterations(50);
        let a = optimize(&cfg).unwrap();
        let b = optimize(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let h = tfim(2, 1.0, 1.0).unwrap();
        let mut cfg = VqeConfig::new(h, 1);
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        cfg.learning_rate = 0.1;
        cfg.restarts = 0;
        assert!(cfg.validate().is_err());
        cfg.restarts = 1;
        cfg.warm_start = Some(vec![0.0; 3]);
        assert!(matches!(cfg.validate(), Err(Error::ParameterLength { .. })));
    }

    #[test]
    fn gd_step_is_plain_descent() {
        let mut s = Stepper::new(Optimizer::Gd, 0.1, 2);
        let mut p = [1.0, -1.0];
        s.step(&mut p, &[2.0, -4.0]);
        assert_eq!(p, [0.8, -0.6]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut s = Stepper::new(Optimizer::adam(), 0.05, 2);
        let mut p = [0.0, 0.0];
        s.step(&mut p, &[3.0, -0.2]);
        assert!((p[0] + 0.05).abs() < 1e-8);
        assert!((p[1] - 0.05).abs() < 1e-7);
    }

    #[test]
    fn sweep_row_bookkeeping() {
        let h = tfim(2, 1.0, 1.0).unwrap();
        let cfg = VqeConfig::new(h, 1).with_restarts(2).with_max_iterations(30);
        let rows = noise_sweep(&cfg, NoiseFamily::Dephasing, &[0.0, 0.01, 0.02], &[1, 2]).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        assert_eq!((rows[0].depth, rows[0].p, rows[0].restart), (1, 0.0, 0));
        assert_eq!((rows[11].depth, rows[11].p, rows[11].restart), (2, 0.02, 1));
        assert_eq!(sweep_means(&rows).len(), 6);
    }
}
