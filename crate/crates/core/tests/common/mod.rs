#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use noisyvqe::ansatz::{build_layout, execute};
use noisyvqe::channels::{KrausChannel, NoiseFamily, NoiseSpec, TwoQubitNoise};
use noisyvqe::densmat::{DensityMatrix, C64};
use noisyvqe::hamiltonians::{heisenberg, t_heisenberg, tfim, Hamiltonian, ModelKind};
use noisyvqe::meanfield::{mf_energy, mf_gradient, BlochAngles};
use noisyvqe::measurement::{apply_confusion, group_terms, mitigate, ConfusionMatrix, CountsDistribution, MeasurementSetup};
use noisyvqe::vqe::gradient_parameter_shift;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// `A_k S^{-1/2}` with `S = sum A_k^dag A_k` is a complete Kraus set.
pub fn random_channel(rng: &mut ChaCha8Rng, arity: usize) -> KrausChannel {
    let d = 1 << arity;
    let k = rng.gen_range(1..=4);
    let raw: Vec<DMatrix<C64>> = (0..k).map(|_| gaussian_matrix(rng, d)).collect();
    let s = raw.iter().fold(DMatrix::zeros(d, d), |acc, a| acc + a.adjoint() * a);
    let eig = s.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| C64::new(1.0 / v.sqrt(), 0.0)));
    let vecs = eig.eigenvectors;
    let s_inv_sqrt = &vecs * inv_sqrt * vecs.adjoint();
    let ops = raw
        .iter()
        .map(|a| {
            let e = a * &s_inv_sqrt;
            (0..d).flat_map(|r| (0..d).map(move |c| (r, c))).map(|(r, c)| e[(r, c)]).collect()
        })
        .collect();
    KrausChannel::new(arity, ops, "random").expect("complete by construction")
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let a = gaussian_matrix(rng, 1 << n);
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::from_matrix(&(m / tr)).unwrap()
}

pub fn random_targets(rng: &mut ChaCha8Rng, n: usize, arity: usize) -> Vec<usize> {
    let a = rng.gen_range(0..n);
    if arity == 1 {
        return vec![a];
    }
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    vec![a, b]
}

/// The operator on `n` qubits acting as `e` on `targets` (first target is
/// the most significant local bit) and as identity elsewhere.
pub fn embed(e: &[C64], n: usize, targets: &[usize]) -> DMatrix<C64> {
    let dim = 1 << n;
    let k = targets.len();
    let bit = |i: usize, q: usize| (i >> (n - 1 - q)) & 1;
    let local = |i: usize| targets.iter().fold(0, |acc, &q| acc << 1 | bit(i, q));
    let rest_mask: usize = (0..n).filter(|q| !targets.contains(q)).map(|q| 1 << (n - 1 - q)).sum();
    DMatrix::from_fn(dim, dim, |i, j| {
        if i & rest_mask != j & rest_mask {
            C64::new(0.0, 0.0)
        } else {
            e[local(i) * (1 << k) + local(j)]
        }
    })
}

pub fn random_noise(rng: &mut ChaCha8Rng) -> NoiseSpec {
    match rng.gen_range(0..4) {
        0..=2 => NoiseFamily::ALL[rng.gen_range(0..3)].noise_spec(rng.gen_range(0.0..0.1)).unwrap(),
        _ => NoiseSpec::new(
            vec![random_channel(rng, 1)],
            vec![TwoQubitNoise::Joint(random_channel(rng, 2)), TwoQubitNoise::PerQubit(random_channel(rng, 1))],
        )
        .unwrap(),
    }
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize) -> Hamiltonian {
    ModelKind::ALL[rng.gen_range(0..3)].build(n, rng.gen_range(0.2..1.5), rng.gen_range(-1.5..1.5)).unwrap()
}

/// Outcome of one randomized check; `Err` carries what went wrong.
pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn check_completeness(seed: u64, arity: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dev = random_channel(&mut rng, arity).completeness_deviation();
    ensure(dev < 1e-10, || format!("completeness deviation {dev:e}"))
}

pub fn check_trace_and_hermiticity(seed: u64, arity: usize, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = random_channel(&mut rng, arity);
    let rho = random_state(&mut rng, n);
    let targets = random_targets(&mut rng, n, arity);
    let out = rho.apply_channel(&ch, &targets).map_err(|e| e.to_string())?;
    let tr = (out.trace() - C64::new(1.0, 0.0)).norm();
    let herm = out.as_operator().max_hermitian_deviation();
    let min_eig = out.min_eigenvalue();
    ensure(tr < 1e-10 && herm < 1e-10 && min_eig > -1e-9, || {
        format!("trace error {tr:e}, hermiticity {herm:e}, min eigenvalue {min_eig:e}")
    })
}

pub fn check_linearity(seed: u64, a: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = random_channel(&mut rng, 2);
    let (r1, r2) = (random_state(&mut rng, 3), random_state(&mut rng, 3));
    let targets = random_targets(&mut rng, 3, 2);
    let apply = |r: &DensityMatrix| r.apply_channel(&ch, &targets).unwrap();
    let lhs = apply(&r1.mix(&r2, a).unwrap());
    let rhs = apply(&r1).mix(&apply(&r2), a).unwrap();
    let diff = lhs.max_abs_diff(&rhs);
    ensure(diff < 1e-12, || format!("linearity error {diff:e}"))
}

pub fn check_embedding(seed: u64, arity: usize, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = random_channel(&mut rng, arity);
    let rho = random_state(&mut rng, n);
    let targets = random_targets(&mut rng, n, arity);
    let m = rho.matrix();
    let brute = ch.operators().iter().fold(DMatrix::zeros(1 << n, 1 << n), |acc, e| {
        let big = embed(e, n, &targets);
        acc + &big * &m * big.adjoint()
    });
    let fast = rho.apply_channel(&ch, &targets).map_err(|e| e.to_string())?.matrix();
    let diff = (fast - brute).iter().map(|v| v.norm()).fold(0.0, f64::max);
    ensure(diff < 1e-12, || format!("embedding error {diff:e} on {targets:?}"))
}

pub fn check_parameter_shift(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = [2, 4][rng.gen_range(0..2)];
    let layout = build_layout(n, rng.gen_range(1..=2)).unwrap();
    let h = random_model(&mut rng, n);
    let noise = random_noise(&mut rng);
    let params: Vec<f64> = (0..layout.n_params()).map(|_| rng.gen_range(0.0..TAU)).collect();
    let grad = gradient_parameter_shift(&layout, &params, &h, Some(&noise)).map_err(|e| e.to_string())?;
    let step = 1e-5;
    let energy = |p: &[f64]| execute(&layout, p, Some(&noise)).unwrap().expectation(&h).unwrap();
    let mut shifted = params.clone();
    for j in 0..params.len() {
        shifted[j] = params[j] + step;
        let plus = energy(&shifted);
        shifted[j] = params[j] - step;
        let minus = energy(&shifted);
        shifted[j] = params[j];
        let fd = (plus - minus) / (2.0 * step);
        ensure((fd - grad[j]).abs() < 1e-6, || format!("param {j}: finite difference {fd} vs shift rule {}", grad[j]))?;
    }
    Ok(())
}

pub fn check_mean_field_gradient(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = [2, 4, 6][rng.gen_range(0..3)];
    let h = random_model(&mut rng, n);
    let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..4.0)).collect();
    let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..7.0)).collect();
    let angles = BlochAngles::new(theta, phi).unwrap();
    let grad = mf_gradient(&h, &angles).map_err(|e| e.to_string())?;
    let step = 1e-6;
    for site in 0..n {
        for k in 0..2 {
            let mut plus = angles.clone();
            let mut minus = angles.clone();
            let (p, m) = if k == 0 {
                (&mut plus.theta[site], &mut minus.theta[site])
            } else {
                (&mut plus.phi[site], &mut minus.phi[site])
            };
            *p += step;
            *m -= step;
            let fd = (mf_energy(&h, &plus).unwrap() - mf_energy(&h, &minus).unwrap()) / (2.0 * step);
            let an = grad[2 * site + k];
            ensure((fd - an).abs() < 1e-7, || format!("site {site} angle {k}: {fd} vs {an}"))?;
        }
    }
    Ok(())
}

pub fn check_mitigation_inverse(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 1 << n;
    // Diagonally dominant columns keep the matrix well conditioned.
    let mut p = DMatrix::from_fn(d, d, |i, j| if i == j { rng.gen_range(2.0..4.0) * d as f64 } else { rng.gen_range(0.0..1.0) });
    for j in 0..d {
        let s = p.column(j).sum();
        p.column_mut(j).scale_mut(1.0 / s);
    }
    let p = ConfusionMatrix::new(p).map_err(|e| e.to_string())?;
    let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let dist = CountsDistribution::from_probabilities(n, probs.clone()).unwrap();
    let back = mitigate(&apply_confusion(&dist, &p, &mut rng).unwrap(), &p).map_err(|e| e.to_string())?;
    let err = back.values().iter().zip(&probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(err < 1e-10 && (back.total() - 1.0).abs() < 1e-9, || format!("round-trip error {err:e}"))
}

pub fn check_exact_pipeline(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = build_layout(2, 1).unwrap();
    let params: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
    let noise = random_noise(&mut rng);
    let rho = execute(&layout, &params, Some(&noise)).unwrap();
    for h in [tfim(2, 1.0, 1.0).unwrap(), heisenberg(2).unwrap(), t_heisenberg(2, 1.0, 1.0).unwrap()] {
        let e = MeasurementSetup::exact().estimate(&rho, &h, &group_terms(&h), &mut rng).map_err(|e| e.to_string())?;
        let dense = rho.expectation(&h).unwrap();
        ensure((e - dense).abs() < 1e-10, || format!("pipeline {e} vs dense {dense}"))?;
    }
    Ok(())
}
