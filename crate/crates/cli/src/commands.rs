use noisyvqe::analysis::{accumulation_curve, crossover_probability, fit_exponential, non_accumulation_check};
use noisyvqe::ansatz::build_layout;
use noisyvqe::channels::{ibm_device_noise, NoiseFamily, NoiseSpec};
use noisyvqe::error::Error;
use noisyvqe::meanfield::mf_optimize;
use noisyvqe::measurement::{sampled_vqe, MeasurementSetup};
use noisyvqe::vqe::{noise_sweep, optimize_at, stream_rng, sweep_means, VqeConfig};
use rand::Rng;
use rayon::prelude::*;

use crate::config::*;
use crate::output::{num, Table};
use crate::CliError;

fn join(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

pub fn depth_table(cfg: &DepthTableConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new("depths", &["model", "n", "depth", "e0", "best_energy", "ratio", "reached"]);
    let mut grid = 0;
    for &m in &cfg.models {
        for &n in &cfg.sizes {
            let h = m.build(n, cfg.couplings.j, cfg.couplings.h)?;
            let e0 = h.exact_ground_energy()?;
            for d in 1..=cfg.max_depth {
                let res = optimize_at(&cfg.optimizer.vqe(h.clone(), d, seed), grid)?;
                grid += 1;
                let ratio = res.best_energy / e0;
                let reached = ratio >= cfg.threshold;
                t.push(vec![
                    m.to_string(),
                    n.to_string(),
                    d.to_string(),
                    num(e0),
                    num(res.best_energy),
                    num(ratio),
                    reached.to_string(),
                ]);
                if reached {
                    break;
                }
            }
        }
    }
    Ok(vec![t])
}

pub fn noise_sweep_cmd(cfg: &NoiseSweepConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let mut rows = Table::new(
        "rows",
        &["model", "n", "depth", "family", "p", "restart", "energy", "e0", "rel_energy", "iterations"],
    );
    let mut means = Table::new("means", &["model", "n", "depth", "family", "p", "mean_rel_energy"]);
    for &m in &cfg.models {
        let h = m.build(cfg.n, cfg.couplings.j, cfg.couplings.h)?;
        let depths = match &cfg.depths {
            Some(d) => d.clone(),
            None => vec![default_depth(m, cfg.n).expect("validated")],
        };
        let base = cfg.optimizer.vqe(h, depths[0], seed);
        for &family in &cfg.families {
            let sweep = noise_sweep(&base, family, &cfg.p_grid, &depths)?;
            for r in &sweep {
                rows.push(vec![
                    m.to_string(),
                    cfg.n.to_string(),
                    r.depth.to_string(),
                    family.to_string(),
                    num(r.p),
                    r.restart.to_string(),
                    num(r.energy),
                    num(r.e0),
                    num(r.rel_energy),
                    r.iterations.to_string(),
                ]);
            }
            for (d, p, rel) in sweep_means(&sweep) {
                means.push(vec![m.to_string(), cfg.n.to_string(), d.to_string(), family.to_string(), num(p), num(rel)]);
            }
        }
    }
    Ok(vec![rows, means])
}

/// Noisy energies at every `p`, reduced over restarts; optionally warm
/// started from the noiseless optimum.
pub fn depolarizing_energies(
    base: &VqeConfig,
    p_grid: &[f64],
    aggregate: Aggregate,
    warm_start: bool,
) -> noisyvqe::Result<Vec<f64>> {
    let warm = if warm_start {
        let clean = VqeConfig { noise: None, warm_start: None, ..base.clone() };
        Some(optimize_at(&clean, p_grid.len())?.best_params.into_inner())
    } else {
        None
    };
    p_grid
        .par_iter()
        .enumerate()
        .map(|(gi, &p)| {
            let cfg = VqeConfig {
                noise: Some(NoiseFamily::Depolarizing.noise_spec(p)?),
                warm_start: warm.clone(),
                ..base.clone()
            };
            let res = optimize_at(&cfg, gi)?;
            Ok(match aggregate {
                Aggregate::Mean => res.mean_energy(),
                Aggregate::Best => res.best_energy,
            })
        })
        .collect()
}

pub fn crossover(cfg: &CrossoverConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let mut summary = Table::new(
        "crossover",
        &["model", "n", "depth", "e0", "e_mf", "fit_amplitude", "fit_rate", "fit_residual", "p_star", "status"],
    );
    let mut points = Table::new("points", &["model", "n", "depth", "p", "energy", "rel_energy", "e_mf"]);
    for &m in &cfg.models {
        for &n in &cfg.sizes {
            let depth = cfg.depth(m, n).expect("validated");
            let h = m.build(n, cfg.couplings.j, cfg.couplings.h)?;
            let e0 = h.exact_ground_energy()?;
            let e_mf = mf_optimize(&h, cfg.mf_restarts, seed)?.energy;
            let base = cfg.optimizer.vqe(h, depth, seed);
            let energies = depolarizing_energies(&base, &cfg.p_grid, cfg.aggregate, cfg.warm_start)?;
            for (&p, &e) in cfg.p_grid.iter().zip(&energies) {
                points.push(vec![
                    m.to_string(),
                    n.to_string(),
                    depth.to_string(),
                    num(p),
                    num(e),
                    num((e - e0) / e0.abs()),
                    num(e_mf),
                ]);
            }
            let pts: Vec<(f64, f64)> = cfg.p_grid.iter().copied().zip(energies).collect();
            let mut row = vec![m.to_string(), n.to_string(), depth.to_string(), num(e0), num(e_mf)];
            match fit_exponential(&pts) {
                Ok(fit) => {
                    row.extend([num(fit.amplitude), num(fit.rate), num(fit.residual_norm)]);
                    match crossover_probability(&fit, e_mf) {
                        Ok(p) => row.extend([num(p), "ok".into()]),
                        Err(Error::NoCrossing) => row.extend([String::new(), "no_crossing".into()]),
                        Err(e) => return Err(e.into()),
                    }
                }
                Err(e) => row.extend([String::new(), String::new(), String::new(), String::new(), format!("fit_failed: {e}")]),
            }
            summary.push(row);
        }
    }
    Ok(vec![summary, points])
}

fn sampled_start(n_params: usize, seed: u64, grid: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0, grid);
    (0..n_params).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

pub fn ibm_compare(cfg: &IbmCompareConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let cat = catalog(&cfg.device_file)?;
    let mut t = Table::new(
        "ibm",
        &["model", "device", "e_sim", "e_ext", "rel_deviation", "e_sampled", "rel_deviation_sampled"],
    );
    for (i, row) in cfg.rows.iter().enumerate() {
        let h = row.model.build(2, cfg.couplings.j, cfg.couplings.h)?;
        let e_ext = h.exact_ground_energy()?;
        let noise = ibm_device_noise(&cat.get(&row.device)?.average)?;
        let vqe = cfg.optimizer.vqe(h.clone(), cfg.depth, seed).with_noise(Some(noise.clone()));
        let e_sim = optimize_at(&vqe, i)?.best_energy;
        let mut cells = vec![
            row.model.to_string(),
            row.device.clone(),
            num(e_sim),
            num(e_ext),
            num((e_sim - e_ext).abs() / e_ext.abs()),
        ];
        match &cfg.sampled {
            Some(s) => {
                let e = run_sampled(&h, cfg.depth, Some(&noise), s, false, seed, i)?.final_estimate;
                cells.extend([num(e), num((e - e_ext).abs() / e_ext.abs())]);
            }
            None => cells.extend([String::new(), String::new()]),
        }
        t.push(cells);
    }
    Ok(vec![t])
}

pub struct SampledRun {
    pub trajectory: Vec<f64>,
    /// Mean of the last ten epoch estimates.
    pub final_estimate: f64,
    pub params: Vec<f64>,
}

pub fn run_sampled(
    h: &noisyvqe::hamiltonians::Hamiltonian,
    depth: usize,
    noise: Option<&NoiseSpec>,
    s: &SampledSettings,
    exact: bool,
    seed: u64,
    grid: usize,
) -> Result<SampledRun, CliError> {
    let layout = build_layout(h.n_qubits(), depth)?;
    let confusion = s.confusion.as_ref().map(|c| c.build(h.n_qubits())).transpose()?;
    let setup = MeasurementSetup { shots: if exact { None } else { Some(s.shots) }, confusion };
    let start = sampled_start(layout.n_params(), seed, grid);
    let (params, trajectory) = sampled_vqe(&layout, start, h, noise, &setup, s.learning_rate, s.epochs, seed)?;
    let tail = &trajectory[trajectory.len().saturating_sub(10)..];
    let final_estimate = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(SampledRun { trajectory, final_estimate, params })
}

pub fn sampled_vqe_cmd(cfg: &SampledVqeConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let h = cfg.model.build(cfg.n, cfg.couplings.j, cfg.couplings.h)?;
    let noise = match &cfg.noise {
        NoiseChoice::Device(key) => Some(ibm_device_noise(&catalog(&cfg.device_file)?.get(key)?.average)?),
        NoiseChoice::Family { family, p } => Some(family.noise_spec(*p)?),
        NoiseChoice::None => None,
    };
    let run = run_sampled(&h, cfg.depth, noise.as_ref(), &cfg.sampling, cfg.exact, seed, 0)?;
    let mut t = Table::new("trajectory", &["epoch", "energy"]);
    for (i, e) in run.trajectory.iter().enumerate() {
        t.push(vec![i.to_string(), num(*e)]);
    }
    let mut p = Table::new("params", &["index", "theta"]);
    for (i, v) in run.params.iter().enumerate() {
        p.push(vec![i.to_string(), num(*v)]);
    }
    Ok(vec![t, p])
}

pub fn accumulation(cfg: &AccumulationConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let mut acc = Table::new(
        "accumulation",
        &["model", "n", "depth", "p", "epsilon_fit", "epsilon_analytic", "energy_sim", "energy_accum", "e0"],
    );
    let mut cmp = Table::new("families", &["model", "n", "depth", "family", "p", "energy", "rel_energy"]);
    for &m in &cfg.models {
        let h = m.build(cfg.n, cfg.couplings.j, cfg.couplings.h)?;
        let base = cfg.optimizer.vqe(h, cfg.depths[0], seed);
        for r in accumulation_curve(&base, &cfg.depths, cfg.p, cfg.effective_depth)? {
            acc.push(vec![
                m.to_string(),
                cfg.n.to_string(),
                r.depth.to_string(),
                num(r.p),
                num(r.epsilon_fit),
                num(r.epsilon_analytic),
                num(r.energy_sim),
                num(r.energy_accum),
                num(r.e0),
            ]);
        }
        let mut families = vec![NoiseFamily::Depolarizing];
        families.extend(cfg.compare_families.iter().copied().filter(|f| *f != NoiseFamily::Depolarizing));
        for fam in families {
            for r in non_accumulation_check(&base, fam, cfg.p, &cfg.depths)? {
                cmp.push(vec![
                    m.to_string(),
                    cfg.n.to_string(),
                    r.depth.to_string(),
                    fam.to_string(),
                    num(r.p),
                    num(r.energy),
                    num(r.rel_energy),
                ]);
            }
        }
    }
    Ok(vec![acc, cmp])
}

pub fn meanfield(cfg: &MeanFieldConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new("meanfield", &["model", "n", "e_mf", "e0", "theta", "phi"]);
    for &m in &cfg.models {
        for &n in &cfg.sizes {
            let h = m.build(n, cfg.couplings.j, cfg.couplings.h)?;
            let r = mf_optimize(&h, cfg.restarts, seed)?;
            t.push(vec![
                m.to_string(),
                n.to_string(),
                num(r.energy),
                num(h.exact_ground_energy()?),
                join(&r.angles.theta),
                join(&r.angles.phi),
            ]);
        }
    }
    Ok(vec![t])
}
