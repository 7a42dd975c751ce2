//! Configuration types shared by the subcommands: queue descriptions,
//! surface controls, simulation budgets, and the experiment grid. All
//! commands read one JSON document whose shape is one of these types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rqab::dist::DistributionSpec;
use rqab::model::{PatienceSpec, QueueModel};
use rqab::renewal::IdcCurve;
use rqab::sim::{default_warmup, SimConfig};
use rqab::tandem::{queue1_from_model, TandemSpec};
use rqab::wck::{
    default_c_grid, default_t_grid, load_or_build_surface_with, PdeConfig, WckSurface,
};
use rqab::Result;

/// Renewal queue description. The interarrival mean fixes the arrival
/// rate and the service mean the service rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub interarrival: DistributionSpec,
    pub service: DistributionSpec,
    /// Mean-1 base distribution plus the scale `alpha`.
    pub patience: PatienceSpec,
}

impl ModelConfig {
    pub fn build(&self) -> Result<QueueModel> {
        QueueModel::from_renewal(&self.interarrival, &self.service, &self.patience)
    }
}

/// Reduction-surface cache location and discretization overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    /// Directory holding surface JSON files.
    pub cache_dir: PathBuf,
    /// Drift grid; defaults to 41 points on `[-10, 10]`.
    pub c_grid: Option<Vec<f64>>,
    /// Output time grid; defaults to 60 log points on `[1e-3, 100]`.
    pub t_grid: Option<Vec<f64>>,
    /// Spatial mesh size of the PDE solves.
    pub n_x: Option<usize>,
    /// Time-step ceiling of the PDE solves.
    pub dt_max: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            cache_dir: PathBuf::from("rqab-cache"),
            c_grid: None,
            t_grid: None,
            n_x: None,
            dt_max: None,
        }
    }
}

impl SurfaceConfig {
    /// Loads or builds the surface for zero-expansion order `k`.
    pub fn load(&self, k: u32) -> Result<WckSurface> {
        let mut cfg = PdeConfig::default();
        if let Some(n) = self.n_x {
            cfg.n_x = n;
        }
        if let Some(dt) = self.dt_max {
            cfg.dt_max = dt;
        }
        let c_grid = self.c_grid.clone().unwrap_or_else(default_c_grid);
        let t_grid = self.t_grid.clone().unwrap_or_else(default_t_grid);
        load_or_build_surface_with(k, &c_grid, &t_grid, &self.cache_dir, &cfg)
    }
}

/// Fixed-point formulation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    First,
    Refined,
}

/// `solve` input: one model, one algorithm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub model: ModelConfig,
    pub algorithm: AlgorithmChoice,
    /// Robustness parameter; calibrated at the model's drift when absent.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub surface: SurfaceConfig,
}

/// `benchmark` input: one model; the exact formula and every closed-form
/// baseline are reported, inapplicable ones flagged.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub model: ModelConfig,
}

/// `simulate` input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    pub run_time: f64,
    /// Defaults to `max(0.1 run_time, 1e4 / lambda)`.
    #[serde(default)]
    pub warmup_time: Option<f64>,
    #[serde(default = "default_n_batches")]
    pub n_batches: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    /// Window lengths for an effective-IDW estimate, written to a sibling
    /// `.idw.csv` file when nonempty.
    #[serde(default)]
    pub idw_grid: Vec<f64>,
}

fn default_n_batches() -> u32 {
    20
}

fn default_replications() -> u32 {
    1
}

impl SimulateConfig {
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let model = self.model.build()?;
        let warmup = self
            .warmup_time
            .unwrap_or_else(|| default_warmup(model.lambda(), self.run_time));
        Ok(SimConfig {
            model,
            warmup_time: warmup,
            run_time: self.run_time,
            n_batches: self.n_batches,
            seed: self.seed,
            replications: self.replications,
        })
    }
}

/// Upstream station of a tandem: no abandonment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamConfig {
    pub interarrival: DistributionSpec,
    pub service: DistributionSpec,
}

/// Downstream station of a tandem; its arrival rate is the upstream
/// throughput and its arrival variability the blended departure IDC.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownstreamConfig {
    pub service: DistributionSpec,
    pub patience: PatienceSpec,
}

/// `tandem` input: two stations in series.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TandemConfig {
    pub queue1: UpstreamConfig,
    pub queue2: DownstreamConfig,
    /// Robustness parameter; calibrated at the downstream drift when
    /// absent.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub surface: SurfaceConfig,
    /// Times at which the blended departure IDC is exported (`--idc-out`).
    #[serde(default)]
    pub idc_grid: Vec<f64>,
    /// Seed grid for tabulating the upstream phase-type IDCs; defaults to
    /// 60 log points on `[1e-2, 1e3]`.
    #[serde(default)]
    pub idc_tabulation_grid: Option<Vec<f64>>,
}

impl TandemConfig {
    pub fn build_spec(&self) -> Result<TandemSpec> {
        let upstream = QueueModel::from_renewal(
            &self.queue1.interarrival,
            &self.queue1.service,
            &PatienceSpec::exponential(1.0),
        )?;
        let grid = self
            .idc_tabulation_grid
            .clone()
            .unwrap_or_else(default_idc_tabulation_grid);
        let queue1 = queue1_from_model(&upstream, &grid)?;
        let queue2 = QueueModel::from_idc(
            upstream.lambda(),
            IdcCurve::constant(1.0),
            &self.queue2.service,
            &self.queue2.patience,
        )?;
        Ok(TandemSpec { queue1, queue2 })
    }
}

/// Default tabulation support for upstream IDC curves.
pub fn default_idc_tabulation_grid() -> Vec<f64> {
    log_grid(1e-2, 1e3, 60)
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

/// `wck` input: surface order plus cache controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WckConfig {
    pub k: u32,
    #[serde(default)]
    pub surface: SurfaceConfig,
}

/// IDC computation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IdcMethod {
    #[default]
    PhaseType,
    MonteCarlo,
}

/// `idc` input: one interarrival distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdcConfig {
    pub distribution: DistributionSpec,
    /// Defaults to 60 log points on `[1e-2, 1e3]`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub method: IdcMethod,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_paths() -> usize {
    20_000
}

/// Truth source for grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthChoice {
    ExactMm1Gi,
    Simulation,
}

/// Approximation methods the grid can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    RqFirst,
    RqRefined,
    Wg,
    HazardRate,
    Hg,
    HgModified,
}

impl MethodChoice {
    /// Stable identifier used in CSV columns and file names.
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::RqFirst => "rq_first",
            MethodChoice::RqRefined => "rq_refined",
            MethodChoice::Wg => "wg",
            MethodChoice::HazardRate => "hazard_rate",
            MethodChoice::Hg => "hg",
            MethodChoice::HgModified => "hg_modified",
        }
    }
}

/// Cell template: the interarrival mean is overridden to `1/lambda` and
/// the patience scale to `alpha` in every cell; the service distribution
/// is used as given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateConfig {
    pub interarrival: DistributionSpec,
    pub service: DistributionSpec,
    pub patience_base: DistributionSpec,
}

/// Simulation-truth budget. The run length doubles (deterministic
/// schedule) until the relative CI half-width target is met, the doubling
/// limit is reached, or the wall-clock cap is exceeded; only the cap can
/// make outputs machine-dependent, and hitting it is recorded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBudget {
    /// First run length in model time.
    pub initial_run_time: f64,
    /// Target for `ci_halfwidth / estimate`.
    pub ci_target: f64,
    /// Maximum number of doublings after the initial run.
    pub max_doublings: u32,
    /// Wall-clock cap per cell, in seconds.
    pub time_cap_secs: f64,
    pub n_batches: u32,
    pub replications: u32,
}

impl Default for SimBudget {
    fn default() -> Self {
        SimBudget {
            initial_run_time: 2e4,
            ci_target: 0.01,
            max_doublings: 6,
            time_cap_secs: 120.0,
            n_batches: 20,
            replications: 1,
        }
    }
}

/// `grid` input: the experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_lambda_values")]
    pub lambda_values: Vec<f64>,
    #[serde(default = "default_alpha_values")]
    pub alpha_values: Vec<f64>,
    pub template: TemplateConfig,
    /// Chosen from the template when absent: exact for Poisson arrivals
    /// with exponential service, simulation otherwise.
    #[serde(default)]
    pub truth: Option<TruthChoice>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodChoice>,
    /// Saturation bound for the clipped-error column.
    #[serde(default = "default_clip")]
    pub clip: f64,
    /// Base seed; cell seeds are offsets from it.
    #[serde(default)]
    pub seed: u64,
    /// Fill inapplicable Ward-Glynn cells with the hazard-rate value,
    /// marked as substituted.
    #[serde(default = "default_true")]
    pub substitute_wg: bool,
    /// Robustness override applied to both RQ methods; calibrated per
    /// cell when absent.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub sim: SimBudget,
}

fn default_true() -> bool {
    true
}

fn default_clip() -> f64 {
    0.30
}

fn default_methods() -> Vec<MethodChoice> {
    vec![
        MethodChoice::RqFirst,
        MethodChoice::RqRefined,
        MethodChoice::Wg,
        MethodChoice::HazardRate,
        MethodChoice::Hg,
        MethodChoice::HgModified,
    ]
}

/// Desk-scale default arrival rates.
pub fn default_lambda_values() -> Vec<f64> {
    vec![0.75, 0.9, 1.0, 1.1, 1.25, 2.0]
}

/// Desk-scale default patience scales.
pub fn default_alpha_values() -> Vec<f64> {
    vec![1.0, 0.125, 1.0 / 32.0, 1.0 / 128.0, 1.0 / 1024.0]
}

/// Full-scale arrival rates: `1 - 2^-j` for `j = 1..=10` and `1 + 2^-j`
/// for `j = -2..=10`, ascending (23 values).
pub fn full_lambda_values() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=10)
        .map(|j| 1.0 - 2f64.powi(-j))
        .chain((-2..=10).map(|j| 1.0 + 2f64.powi(-j)))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Full-scale patience scales: `2^-j` for `j = 0..=13`, descending
/// (14 values).
pub fn full_alpha_values() -> Vec<f64> {
    (0..=13).map(|j| 2f64.powi(-j)).collect()
}
