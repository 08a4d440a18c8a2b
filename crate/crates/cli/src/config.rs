use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use noisyvqe::channels::NoiseFamily;
use noisyvqe::devices::DeviceCatalog;
use noisyvqe::hamiltonians::{Hamiltonian, ModelKind};
use noisyvqe::measurement::{ConfusionMatrix, DEFAULT_SHOTS};
use noisyvqe::vqe::{Optimizer, VqeConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_j() -> f64 {
    1.0
}
fn default_lr() -> f64 {
    0.05
}
fn default_max_iterations() -> usize {
    2000
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_patience() -> usize {
    10
}
fn default_restarts() -> usize {
    3
}

/// Optimizer settings shared by every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::default(),
            learning_rate: default_lr(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            patience: default_patience(),
            restarts: default_restarts(),
        }
    }
}

impl OptimizerSettings {
    pub fn vqe(&self, h: Hamiltonian, depth: usize, seed: u64) -> VqeConfig {
        let mut cfg = VqeConfig::new(h, depth)
            .with_optimizer(self.optimizer, self.learning_rate)
            .with_max_iterations(self.max_iterations)
            .with_restarts(self.restarts)
            .with_seed(seed);
        cfg.tolerance = self.tolerance;
        cfg.patience = self.patience;
        cfg
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.learning_rate > 0.0) || !(self.tolerance >= 0.0) {
            return Err(CliError::Config("learning_rate must be positive and tolerance nonnegative".into()));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(CliError::Config("max_iterations and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Coupling and field strengths; the Heisenberg model ignores both.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_j")]
    pub h: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Self { j: 1.0, h: 1.0 }
    }
}

/// Minimal depth per model and size from the noiseless depth study; used
/// when a config does not pin a depth.
pub fn default_depth(model: ModelKind, n: usize) -> Option<usize> {
    let row = match model {
        ModelKind::Tfim => [1, 2, 3, 3],
        ModelKind::Heisenberg | ModelKind::Theisenberg => [1, 3, 4, 6],
    };
    match n {
        2 => Some(row[0]),
        4 => Some(row[1]),
        6 => Some(row[2]),
        8 => Some(row[3]),
        _ => None,
    }
}

/// Either an explicit row-major matrix or per-qubit flip rates
/// `[P(1|0), P(0|1)]`, or a CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConfusionSpec {
    Matrix(Vec<Vec<f64>>),
    FlipRates(Vec<[f64; 2]>),
    Csv(PathBuf),
}

impl ConfusionSpec {
    pub fn build(&self, n_qubits: usize) -> Result<ConfusionMatrix, CliError> {
        let p = match self {
            ConfusionSpec::Matrix(rows) => ConfusionMatrix::from_rows(rows),
            ConfusionSpec::FlipRates(rates) => {
                ConfusionMatrix::from_flip_rates(&rates.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>())
            }
            ConfusionSpec::Csv(path) => {
                let f = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                ConfusionMatrix::read_csv(f)
            }
        }
        .map_err(|e| CliError::Config(format!("confusion matrix: {e}")))?;
        if p.n_qubits() != n_qubits {
            return Err(CliError::Config(format!(
                "confusion matrix covers {} qubits, circuit has {n_qubits}",
                p.n_qubits()
            )));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthTableConfig {
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub sizes: Vec<usize>,
    #[serde(default = "DepthTableConfig::default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "DepthTableConfig::default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl DepthTableConfig {
    fn default_max_depth() -> usize {
        8
    }
    fn default_threshold() -> f64 {
        0.98
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub n: usize,
    /// Defaults to the minimal depth of each model.
    #[serde(default)]
    pub depths: Option<Vec<usize>>,
    #[serde(default = "NoiseSweepConfig::default_families")]
    pub families: Vec<NoiseFamily>,
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl NoiseSweepConfig {
    fn default_families() -> Vec<NoiseFamily> {
        NoiseFamily::ALL.to_vec()
    }
}

/// How the restarts at one noise level are reduced to a single energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Best,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverConfig {
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub sizes: Vec<usize>,
    /// Per-model depth override keyed by `"<model>:<n>"`.
    #[serde(default)]
    pub depths: BTreeMap<String, usize>,
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub aggregate: Aggregate,
    /// Start every noisy run from the optimized noiseless parameters.
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "CrossoverConfig::default_mf_restarts")]
    pub mf_restarts: usize,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl CrossoverConfig {
    fn default_mf_restarts() -> usize {
        noisyvqe::meanfield::DEFAULT_RESTARTS
    }

    pub fn depth(&self, model: ModelKind, n: usize) -> Option<usize> {
        self.depths.get(&format!("{model}:{n}")).copied().or_else(|| default_depth(model, n))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbmRow {
    pub model: ModelKind,
    pub device: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledSettings {
    #[serde(default = "SampledSettings::default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub confusion: Option<ConfusionSpec>,
    #[serde(default = "SampledSettings::default_epochs")]
    pub epochs: usize,
    #[serde(default = "SampledSettings::default_lr")]
    pub learning_rate: f64,
}

impl Default for SampledSettings {
    fn default() -> Self {
        Self { shots: DEFAULT_SHOTS, confusion: None, epochs: Self::default_epochs(), learning_rate: Self::default_lr() }
    }
}

impl SampledSettings {
    fn default_shots() -> u64 {
        DEFAULT_SHOTS
    }
    fn default_epochs() -> usize {
        100
    }
    fn default_lr() -> f64 {
        0.1
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.shots == 0 || self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(CliError::Config("shots, epochs and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbmCompareConfig {
    pub seed: u64,
    pub rows: Vec<IbmRow>,
    /// Calibration catalog; the bundled one when absent.
    #[serde(default)]
    pub device_file: Option<PathBuf>,
    #[serde(default = "IbmCompareConfig::default_depth")]
    pub depth: usize,
    /// Also run the shot-based pipeline.
    #[serde(default)]
    pub sampled: Option<SampledSettings>,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl IbmCompareConfig {
    fn default_depth() -> usize {
        1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccumulationConfig {
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub n: usize,
    pub depths: Vec<usize>,
    pub p: f64,
    #[serde(default)]
    pub effective_depth: noisyvqe::analysis::EffectiveDepth,
    /// Families for the non-accumulation comparison at the same `p`.
    #[serde(default = "AccumulationConfig::default_families")]
    pub compare_families: Vec<NoiseFamily>,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

impl AccumulationConfig {
    fn default_families() -> Vec<NoiseFamily> {
        vec![NoiseFamily::Damping, NoiseFamily::Dephasing]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldConfig {
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub sizes: Vec<usize>,
    #[serde(default = "CrossoverConfig::default_mf_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub couplings: Couplings,
}

/// Noise for a sampled run: a device key or a single family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseChoice {
    Device(String),
    Family { family: NoiseFamily, p: f64 },
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledVqeConfig {
    pub seed: u64,
    pub model: ModelKind,
    #[serde(default = "SampledVqeConfig::default_n")]
    pub n: usize,
    #[serde(default = "IbmCompareConfig::default_depth")]
    pub depth: usize,
    #[serde(default = "SampledVqeConfig::default_noise")]
    pub noise: NoiseChoice,
    #[serde(default)]
    pub device_file: Option<PathBuf>,
    /// Use exact probabilities instead of shots.
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub sampling: SampledSettings,
    #[serde(default)]
    pub couplings: Couplings,
}

impl SampledVqeConfig {
    fn default_n() -> usize {
        2
    }
    fn default_noise() -> NoiseChoice {
        NoiseChoice::None
    }
}

pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

pub fn catalog(path: &Option<PathBuf>) -> Result<DeviceCatalog, CliError> {
    match path {
        Some(p) => DeviceCatalog::load(p).map_err(|e| CliError::Config(e.to_string())),
        None => Ok(DeviceCatalog::bundled()),
    }
}

fn check_models(models: &[ModelKind], sizes: &[usize], c: &Couplings) -> Result<(), CliError> {
    if models.is_empty() || sizes.is_empty() {
        return Err(CliError::Config("models and sizes must be nonempty".into()));
    }
    for &m in models {
        for &n in sizes {
            m.build(n, c.j, c.h).map_err(|e| CliError::Config(format!("{m} n={n}: {e}")))?;
        }
    }
    Ok(())
}

fn check_grid(p_grid: &[f64]) -> Result<(), CliError> {
    if p_grid.is_empty() || p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::Config("p_grid must be nonempty with entries in [0, 1]".into()));
    }
    Ok(())
}

fn check_depths(depths: &[usize]) -> Result<(), CliError> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(CliError::Config("depths must be nonempty and positive".into()));
    }
    Ok(())
}

/// Full validation before any computation.
pub trait Validate {
    fn validate(&self) -> Result<(), CliError>;
}

impl Validate for DepthTableConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_models(&self.models, &self.sizes, &self.couplings)?;
        if self.max_depth == 0 || !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(CliError::Config("max_depth must be positive and threshold in (0, 1]".into()));
        }
        self.optimizer.validate()
    }
}

impl Validate for NoiseSweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_models(&self.models, &[self.n], &self.couplings)?;
        check_grid(&self.p_grid)?;
        match &self.depths {
            Some(d) => check_depths(d)?,
            None => {
                for &m in &self.models {
                    default_depth(m, self.n)
                        .ok_or_else(|| CliError::Config(format!("no default depth for {m} n={}; set depths", self.n)))?;
                }
            }
        }
        if self.families.is_empty() {
            return Err(CliError::Config("families must be nonempty".into()));
        }
        self.optimizer.validate()
    }
}

impl Validate for CrossoverConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_models(&self.models, &self.sizes, &self.couplings)?;
        check_grid(&self.p_grid)?;
        if self.p_grid.len() < 3 {
            return Err(CliError::Config("the exponential fit needs at least 3 noise levels".into()));
        }
        for &m in &self.models {
            for &n in &self.sizes {
                match self.depth(m, n) {
                    Some(d) if d > 0 => {}
                    _ => return Err(CliError::Config(format!("no depth for {m}:{n}"))),
                }
            }
        }
        if self.mf_restarts == 0 {
            return Err(CliError::Config("mf_restarts must be positive".into()));
        }
        self.optimizer.validate()
    }
}

impl Validate for IbmCompareConfig {
    fn validate(&self) -> Result<(), CliError> {
        let cat = catalog(&self.device_file)?;
        if self.rows.is_empty() || self.depth == 0 {
            return Err(CliError::Config("rows must be nonempty and depth positive".into()));
        }
        for row in &self.rows {
            cat.get(&row.device).map_err(|e| CliError::Config(e.to_string()))?;
            row.model.build(2, self.couplings.j, self.couplings.h).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(s) = &self.sampled {
            s.validate()?;
            if let Some(c) = &s.confusion {
                c.build(2)?;
            }
        }
        self.optimizer.validate()
    }
}

impl Validate for AccumulationConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_models(&self.models, &[self.n], &self.couplings)?;
        check_depths(&self.depths)?;
        check_grid(&[self.p])?;
        for &m in &self.models {
            let h = m.build(self.n, self.couplings.j, self.couplings.h).map_err(|e| CliError::Config(e.to_string()))?;
            if h.trace().abs() > 1e-12 {
                return Err(CliError::Config(format!("{m} is not traceless")));
            }
        }
        self.optimizer.validate()
    }
}

impl Validate for MeanFieldConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_models(&self.models, &self.sizes, &self.couplings)?;
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be positive".into()));
        }
        Ok(())
    }
}

impl Validate for SampledVqeConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_models(&[self.model], &[self.n], &self.couplings)?;
        if self.depth == 0 {
            return Err(CliError::Config("depth must be positive".into()));
        }
        match &self.noise {
            NoiseChoice::Device(key) => {
                if self.n != 2 {
                    return Err(CliError::Config("device noise is calibrated for qubit pairs; use n = 2".into()));
                }
                catalog(&self.device_file)?.get(key).map_err(|e| CliError::Config(e.to_string()))?;
            }
            NoiseChoice::Family { p, .. } => check_grid(&[*p])?,
            NoiseChoice::None => {}
        }
        self.sampling.validate()?;
        if let Some(c) = &self.sampling.confusion {
            c.build(self.n)?;
        }
        Ok(())
    }
}
