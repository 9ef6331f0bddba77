//! Deterministic Monte Carlo experiments on the variance-ratio statistic.
//!
//! Every replicate draws from its own [`RngStream`], derived from the master
//! seed and the (cell, replicate) indices, and results are reduced in
//! replicate order. Summaries are therefore bit-identical for any number of
//! worker threads.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, Family, MixtureComponent, RngStream, Sampler};
use crate::error::{Error, Result};
use crate::fitting::{fit_mle, plug_in_variance};
use crate::special::chi2_quantile;
use crate::vartest::{statistic_d, VarianceFunction};

pub const DEFAULT_REPLICATES: u64 = 10_000;
pub const DEFAULT_MASTER_SEED: u64 = 42;
pub const DEFAULT_LEVEL: f64 = 0.05;
/// Cells whose fit-failure fraction exceeds this are flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 1e-3;

/// Grids and sample sizes of the reference mean/variance table.
pub const TABLE1_GRID: [f64; 5] = [1.0, 5.0, 10.0, 15.0, 20.0];
pub const TABLE1_WEIBULL_SHAPE_GRID: [f64; 5] = [0.2, 1.0, 2.0, 3.0, 4.0];
pub const TABLE1_SAMPLE_SIZES: [usize; 2] = [100, 200];

/// SplitMix64 output finalizer. A bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The stream for replicate `rep` of cell `cell`. Distinct index pairs map to
/// distinct streams.
pub fn derive_stream_seed(master_seed: u64, cell: u32, rep: u32) -> RngStream {
    RngStream::new(master_seed, mix64(((cell as u64) << 32) | rep as u64))
}

/// A one-parameter slice through a family: the grid value sets one
/// parameter and the others come from `fixed_params`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFamily {
    /// Grid value is the mean.
    Exponential,
    /// Grid value is the shape; fixed `scale`.
    GammaShape,
    /// Grid value is the scale; fixed `shape`.
    GammaScale,
    /// Grid value is the shape; fixed `scale`.
    WeibullShape,
    /// Grid value is the scale; fixed `shape`.
    WeibullScale,
    /// Grid value is `log_mean`; fixed `log_sd`.
    LognormalLogMean,
    /// Grid value is `log_sd`; fixed `log_mean`.
    LognormalLogSd,
    /// Grid value is the natural-scale mean; fixed `variance`.
    LognormalMomentsMean,
    /// Grid value is the natural-scale variance; fixed `mean`.
    LognormalMomentsVariance,
    /// Grid value is the mean.
    Poisson,
    /// Grid value is the success probability; fixed `size`.
    BinomialProb,
}

impl GridFamily {
    pub fn name(self) -> &'static str {
        match self {
            GridFamily::Exponential => "exponential",
            GridFamily::GammaShape => "gamma_shape",
            GridFamily::GammaScale => "gamma_scale",
            GridFamily::WeibullShape => "weibull_shape",
            GridFamily::WeibullScale => "weibull_scale",
            GridFamily::LognormalLogMean => "lognormal_log_mean",
            GridFamily::LognormalLogSd => "lognormal_log_sd",
            GridFamily::LognormalMomentsMean => "lognormal_moments_mean",
            GridFamily::LognormalMomentsVariance => "lognormal_moments_variance",
            GridFamily::Poisson => "poisson",
            GridFamily::BinomialProb => "binomial_prob",
        }
    }

    /// Name of the parameter the grid value sets.
    pub fn varied_param(self) -> &'static str {
        match self {
            GridFamily::Exponential | GridFamily::Poisson | GridFamily::LognormalMomentsMean => "mean",
            GridFamily::GammaShape | GridFamily::WeibullShape => "shape",
            GridFamily::GammaScale | GridFamily::WeibullScale => "scale",
            GridFamily::LognormalLogMean => "log_mean",
            GridFamily::LognormalLogSd => "log_sd",
            GridFamily::LognormalMomentsVariance => "variance",
            GridFamily::BinomialProb => "prob",
        }
    }

    pub fn fixed_param_names(self) -> &'static [&'static str] {
        match self {
            GridFamily::Exponential | GridFamily::Poisson => &[],
            GridFamily::GammaShape | GridFamily::WeibullShape => &["scale"],
            GridFamily::GammaScale | GridFamily::WeibullScale => &["shape"],
            GridFamily::LognormalLogMean => &["log_sd"],
            GridFamily::LognormalLogSd => &["log_mean"],
            GridFamily::LognormalMomentsMean => &["variance"],
            GridFamily::LognormalMomentsVariance => &["mean"],
            GridFamily::BinomialProb => &["size"],
        }
    }

    fn fixed(self, fixed: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
        fixed.get(key).copied().ok_or_else(|| Error::Config {
            key: format!("fixed_params.{key}"),
            message: format!("required by family {}", self.name()),
        })
    }

    fn binomial_size(self, fixed: &BTreeMap<String, f64>) -> Result<u64> {
        let size = self.fixed(fixed, "size")?;
        if size >= 1.0 && size.fract() == 0.0 && size <= u32::MAX as f64 {
            Ok(size as u64)
        } else {
            Err(Error::Config {
                key: "fixed_params.size".into(),
                message: format!("must be a positive integer, got {size}"),
            })
        }
    }

    /// The distribution at grid value `theta`.
    pub fn spec(self, theta: f64, fixed: &BTreeMap<String, f64>) -> Result<DistributionSpec> {
        let f = |k| self.fixed(fixed, k);
        match self {
            GridFamily::Exponential => DistributionSpec::exponential(theta),
            GridFamily::GammaShape => DistributionSpec::gamma(theta, f("scale")?),
            GridFamily::GammaScale => DistributionSpec::gamma(f("shape")?, theta),
            GridFamily::WeibullShape => DistributionSpec::weibull(theta, f("scale")?),
            GridFamily::WeibullScale => DistributionSpec::weibull(f("shape")?, theta),
            GridFamily::LognormalLogMean => DistributionSpec::log_normal(theta, f("log_sd")?),
            GridFamily::LognormalLogSd => DistributionSpec::log_normal(f("log_mean")?, theta),
            GridFamily::LognormalMomentsMean => DistributionSpec::log_normal_from_moments(theta, f("variance")?),
            GridFamily::LognormalMomentsVariance => DistributionSpec::log_normal_from_moments(f("mean")?, theta),
            GridFamily::Poisson => DistributionSpec::poisson(theta),
            GridFamily::BinomialProb => DistributionSpec::binomial(self.binomial_size(fixed)?, theta),
        }
    }

    /// The family refitted to each simulated sample.
    pub fn fit_family(self, fixed: &BTreeMap<String, f64>) -> Result<Family> {
        Ok(match self {
            GridFamily::Exponential => Family::Exponential,
            GridFamily::GammaShape | GridFamily::GammaScale => Family::Gamma,
            GridFamily::WeibullShape | GridFamily::WeibullScale => Family::Weibull,
            GridFamily::LognormalLogMean
            | GridFamily::LognormalLogSd
            | GridFamily::LognormalMomentsMean
            | GridFamily::LognormalMomentsVariance => Family::LogNormal,
            GridFamily::Poisson => Family::Poisson,
            GridFamily::BinomialProb => Family::Binomial { size: self.binomial_size(fixed)? },
        })
    }
}

impl fmt::Display for GridFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    /// Reject when D falls below the `level/2` or above the `1 - level/2`
    /// quantile of χ²ₙ₋₁.
    #[default]
    TwoSidedEqualTail,
}

fn default_replicates() -> u64 {
    DEFAULT_REPLICATES
}

fn default_seed() -> u64 {
    DEFAULT_MASTER_SEED
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: GridFamily,
    #[serde(default)]
    pub parameter_grid: Vec<f64>,
    #[serde(default)]
    pub fixed_params: BTreeMap<String, f64>,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub sided: Sided,
}

fn config_err(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

impl ExperimentConfig {
    pub fn new(family: GridFamily, parameter_grid: Vec<f64>, sample_sizes: Vec<usize>) -> Self {
        Self {
            family,
            parameter_grid,
            fixed_params: BTreeMap::new(),
            sample_sizes,
            replicates: DEFAULT_REPLICATES,
            master_seed: DEFAULT_MASTER_SEED,
            level: DEFAULT_LEVEL,
            sided: Sided::TwoSidedEqualTail,
        }
    }

    pub fn with_fixed(mut self, name: &str, value: f64) -> Self {
        self.fixed_params.insert(name.to_string(), value);
        self
    }

    pub fn with_replicates(mut self, replicates: u64) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    /// Checks the fields shared by every experiment: sizes, replicates and
    /// level.
    pub fn validate_run(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(config_err("replicates", "must be at least 1"));
        }
        if self.replicates > u32::MAX as u64 {
            return Err(config_err("replicates", "must fit in 32 bits"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(config_err("level", format!("must lie in (0, 1), got {}", self.level)));
        }
        if self.sample_sizes.is_empty() {
            return Err(config_err("sample_sizes", "must not be empty"));
        }
        if let Some((i, n)) = self.sample_sizes.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(config_err(format!("sample_sizes[{i}]"), format!("must be at least 2, got {n}")));
        }
        Ok(())
    }

    /// Full validation for grid experiments.
    pub fn validate(&self) -> Result<()> {
        self.validate_run()?;
        if self.parameter_grid.is_empty() {
            return Err(config_err("parameter_grid", "must not be empty"));
        }
        let allowed = self.family.fixed_param_names();
        if let Some(key) = self.fixed_params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(config_err(
                format!("fixed_params.{key}"),
                format!("not a parameter of {} (expected {:?})", self.family, allowed),
            ));
        }
        self.family.fit_family(&self.fixed_params)?;
        for (i, &theta) in self.parameter_grid.iter().enumerate() {
            self.family
                .spec(theta, &self.fixed_params)
                .map_err(|e| match e {
                    Error::Config { .. } => e,
                    other => config_err(format!("parameter_grid[{i}]"), other.to_string()),
                })?;
        }
        Ok(())
    }

    /// Two-sided equal-tail acceptance interval for D at sample size `n`.
    pub fn cutoffs(&self, n: usize) -> Result<(f64, f64)> {
        let df = (n - 1) as f64;
        match self.sided {
            Sided::TwoSidedEqualTail => Ok((
                chi2_quantile(df, 0.5 * self.level)?,
                chi2_quantile(df, 1.0 - 0.5 * self.level)?,
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: String,
    /// Parameters of the sampling distribution, as `name=value` pairs.
    pub params: Vec<(String, f64)>,
    pub n: usize,
    pub empirical_mean_d: f64,
    pub empirical_var_d: f64,
    /// Standard error of `empirical_mean_d`.
    pub se_mean: f64,
    /// Standard error of `empirical_var_d`.
    pub se_var: f64,
    pub lower_cutoff: f64,
    pub upper_cutoff: f64,
    pub rejection_count: u64,
    /// Replicates with a usable statistic.
    pub replicates: u64,
    pub n_failed: u64,
    pub flagged: bool,
    /// Per-replicate statistics in replicate order (failures omitted).
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

impl CellSummary {
    pub fn rejection_rate(&self) -> f64 {
        self.rejection_count as f64 / self.replicates as f64
    }

    pub fn rejection_rate_se(&self) -> f64 {
        let p = self.rejection_rate();
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }

    /// `name=value` pairs joined by `;`, values to 6 significant digits.
    pub fn params_label(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={}", short(*v))).collect::<Vec<_>>().join(";")
    }
}

fn short(v: f64) -> String {
    let s = format!("{v:.6e}");
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{parsed}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub master_seed: u64,
    pub cells: Vec<CellSummary>,
}

struct CellPlan {
    label: String,
    true_spec: DistributionSpec,
    fit_family: Family,
    n: usize,
}

/// Neumaier-compensated accumulator.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.c
    }
}

/// Mean and unbiased variance with their standard errors, summed in slice
/// order.
struct SampleMoments {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

impl SampleMoments {
    fn of(values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mut sum = KahanSum::default();
        values.iter().for_each(|&d| sum.add(d));
        let mean = sum.total() / m;
        let (mut s2, mut s4) = (KahanSum::default(), KahanSum::default());
        for &d in values {
            let e = (d - mean) * (d - mean);
            s2.add(e);
            s4.add(e * e);
        }
        let var = if m > 1.0 { s2.total() / (m - 1.0) } else { f64::NAN };
        let m4 = s4.total() / m;
        let se_var = if m > 3.0 { ((m4 - var * var * (m - 3.0) / (m - 1.0)) / m).max(0.0).sqrt() } else { f64::NAN };
        Self { mean, var, se_mean: (var / m).sqrt(), se_var }
    }
}

fn replicate_statistic(sampler: &Sampler, fit_family: Family, n: usize, stream: RngStream) -> Option<f64> {
    let mut rng = stream.rng();
    let mut data = vec![0.0; n];
    sampler.fill(&mut rng, &mut data);
    let fit = fit_mle(fit_family, &data).ok()?;
    statistic_d(&data, plug_in_variance(&fit)).ok().filter(|d| d.is_finite())
}

fn run_cell(plan: &CellPlan, cell: u32, config: &ExperimentConfig) -> Result<CellSummary> {
    let sampler = Sampler::new(&plan.true_spec)?;
    let (lower_cutoff, upper_cutoff) = config.cutoffs(plan.n)?;
    let outcomes: Vec<Option<f64>> = (0..config.replicates as u32)
        .into_par_iter()
        .map(|rep| {
            let stream = derive_stream_seed(config.master_seed, cell, rep);
            replicate_statistic(&sampler, plan.fit_family, plan.n, stream)
        })
        .collect();

    let statistics: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let n_failed = config.replicates - statistics.len() as u64;
    let SampleMoments { mean, var, se_mean, se_var } = SampleMoments::of(&statistics);
    let rejection_count = statistics.iter().filter(|&&d| d < lower_cutoff || d > upper_cutoff).count() as u64;

    Ok(CellSummary {
        family: plan.label.clone(),
        params: plan.true_spec.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        n: plan.n,
        empirical_mean_d: mean,
        empirical_var_d: var,
        se_mean,
        se_var,
        lower_cutoff,
        upper_cutoff,
        rejection_count,
        replicates: statistics.len() as u64,
        n_failed,
        flagged: n_failed as f64 > FAILURE_FLAG_FRACTION * config.replicates as f64,
        statistics,
    })
}

fn run_plans(plans: &[(CellPlan, &ExperimentConfig)], master_seed: u64) -> Result<ExperimentSummary> {
    let cells = plans
        .iter()
        .enumerate()
        .map(|(i, (plan, config))| run_cell(plan, i as u32, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary { master_seed, cells })
}

fn grid_plans(config: &ExperimentConfig) -> Result<Vec<CellPlan>> {
    config.validate()?;
    let fit_family = config.family.fit_family(&config.fixed_params)?;
    let mut plans = Vec::new();
    for &theta in &config.parameter_grid {
        let spec = config.family.spec(theta, &config.fixed_params)?;
        for &n in &config.sample_sizes {
            plans.push(CellPlan { label: config.family.name().to_string(), true_spec: spec.clone(), fit_family, n });
        }
    }
    Ok(plans)
}

/// Mean and variance of D over a parameter grid, refitting the family by
/// maximum likelihood to every simulated sample. Cells are ordered by grid
/// value, then sample size.
pub fn run_table1(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_table1_rows(std::slice::from_ref(config))
}

/// Several grids in one run. Cells are numbered across all rows so every
/// cell draws from its own streams; all rows must share a master seed.
pub fn run_table1_rows(configs: &[ExperimentConfig]) -> Result<ExperimentSummary> {
    let Some(first) = configs.first() else {
        return Err(config_err("rows", "no experiment rows"));
    };
    if let Some(i) = configs.iter().position(|c| c.master_seed != first.master_seed) {
        return Err(config_err(format!("rows[{i}].master_seed"), "all rows must share one master seed"));
    }
    let mut plans = Vec::new();
    for config in configs {
        plans.extend(grid_plans(config)?.into_iter().map(|p| (p, config)));
    }
    if plans.len() > u32::MAX as usize {
        return Err(config_err("parameter_grid", "too many cells"));
    }
    run_plans(&plans, first.master_seed)
}

/// Rejection counts when samples come from `true_spec` but `fit_family` is
/// fitted and D is referred to χ²ₙ₋₁. One cell per sample size; the grid
/// fields of `config` are not used.
pub fn run_rejection_experiment(
    config: &ExperimentConfig,
    true_spec: &DistributionSpec,
    fit_family: Family,
) -> Result<ExperimentSummary> {
    config.validate_run()?;
    true_spec.validate()?;
    let plans: Vec<(CellPlan, &ExperimentConfig)> = config
        .sample_sizes
        .iter()
        .map(|&n| {
            let label = true_spec.family().name().to_string();
            (CellPlan { label, true_spec: true_spec.clone(), fit_family, n }, config)
        })
        .collect();
    run_plans(&plans, config.master_seed)
}

/// Rejection experiment in which every grid cell is its own true
/// distribution and is refitted within its own family.
pub fn run_rejection_grid(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_table1(config)
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err("threads", e.to_string()))?;
    Ok(pool.install(f))
}

/// Monte Carlo estimate of `Var(D)/n` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub se: f64,
    pub replicates: u64,
    pub n_failed: u64,
}

/// Estimates `Var(D)/n` for `D = Σ (xᵢ - x̄)² / f(x̄)` with samples of size
/// `n` from `spec`, the quantity the delta-method α approximates.
pub fn mc_alpha(
    spec: &DistributionSpec,
    f: &VarianceFunction,
    n: usize,
    replicates: u64,
    master_seed: u64,
) -> Result<AlphaEstimate> {
    if n < 2 {
        return Err(Error::Parameter(format!("sample size must be at least 2, got {n}")));
    }
    if replicates < 4 || replicates > u32::MAX as u64 {
        return Err(Error::Parameter(format!("replicates must be in [4, 2^32), got {replicates}")));
    }
    let sampler = Sampler::new(spec)?;
    let outcomes: Vec<Option<f64>> = (0..replicates as u32)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derive_stream_seed(master_seed, 0, rep).rng();
            let mut data = vec![0.0; n];
            sampler.fill(&mut rng, &mut data);
            let mean = data.iter().sum::<f64>() / n as f64;
            statistic_d(&data, f.evaluate(mean)).ok()
        })
        .collect();
    let values: Vec<f64> = outcomes.into_iter().flatten().collect();
    let moments = SampleMoments::of(&values);
    Ok(AlphaEstimate {
        alpha: moments.var / n as f64,
        se: moments.se_var / n as f64,
        replicates: values.len() as u64,
        n_failed: replicates - values.len() as u64,
    })
}

/// Gamma component with the given mode and variance: shape `a` is the root
/// above one of `v a² - (2v + m²) a + v = 0` and scale is `m / (a - 1)`.
pub fn gamma_with_mode(mode: f64, variance: f64) -> Result<(f64, f64)> {
    if !(mode > 0.0 && mode.is_finite()) {
        return Err(Error::Parameter(format!("mode must be positive, got {mode}")));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Parameter(format!("variance must be positive, got {variance}")));
    }
    let b = 2.0 * variance + mode * mode;
    let shape = (b + mode * (4.0 * variance + mode * mode).sqrt()) / (2.0 * variance);
    if !(shape > 1.0 && shape.is_finite()) {
        return Err(Error::Parameter(format!("no shape above one for mode {mode}, variance {variance}")));
    }
    Ok((shape, mode / (shape - 1.0)))
}

/// Gamma mixture whose components have the given modes and common variance.
pub fn build_gamma_mixture(modes: &[f64], component_variance: f64, weights: &[f64]) -> Result<DistributionSpec> {
    if modes.is_empty() || modes.len() != weights.len() {
        return Err(Error::Parameter("need one weight per mode".into()));
    }
    let components = modes
        .iter()
        .zip(weights)
        .map(|(&m, &weight)| {
            let (shape, scale) = gamma_with_mode(m, component_variance)?;
            Ok(MixtureComponent { weight, shape, scale })
        })
        .collect::<Result<Vec<_>>>()?;
    DistributionSpec::gamma_mixture(components)
}

/// A fully specified rejection study.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionScenario {
    pub name: &'static str,
    pub config: ExperimentConfig,
    pub true_spec: DistributionSpec,
    pub fit_family: Family,
}

impl RejectionScenario {
    pub fn run(&self) -> Result<ExperimentSummary> {
        run_rejection_experiment(&self.config, &self.true_spec, self.fit_family)
    }
}

/// Gamma(shape 0.5, scale 2) data fitted as gamma: D is far from χ²ₙ₋₁ and
/// a true null is rejected well above the nominal rate.
pub fn mooley_false_reject() -> RejectionScenario {
    let config = ExperimentConfig::new(GridFamily::GammaShape, vec![0.5], vec![100])
        .with_fixed("scale", 2.0)
        .with_replicates(100_000);
    RejectionScenario {
        name: "mooley-false-reject",
        true_spec: DistributionSpec::Gamma { shape: 0.5, scale: 2.0 },
        config,
        fit_family: Family::Gamma,
    }
}

/// Trimodal gamma mixture (modes 1, 5, 9, unit variance, equal weights)
/// fitted as a single gamma: the wrong model is rejected far too rarely.
pub fn mooley_false_accept() -> RejectionScenario {
    let w = 1.0 / 3.0;
    RejectionScenario {
        name: "mooley-false-accept",
        true_spec: build_gamma_mixture(&[1.0, 5.0, 9.0], 1.0, &[w, w, w]).expect("valid mixture"),
        config: ExperimentConfig::new(GridFamily::GammaShape, Vec::new(), vec![30]).with_replicates(100_000),
        fit_family: Family::Gamma,
    }
}

pub fn scenario(name: &str) -> Option<RejectionScenario> {
    match name {
        "mooley-false-reject" => Some(mooley_false_reject()),
        "mooley-false-accept" => Some(mooley_false_accept()),
        _ => None,
    }
}

/// The seven rows of the reference mean/variance table.
///
/// The two lognormal rows vary the natural-scale mean (variance 2) and the
/// natural-scale variance (mean 1).
pub fn table1_rows() -> Vec<ExperimentConfig> {
    let sizes = TABLE1_SAMPLE_SIZES.to_vec();
    let grid = TABLE1_GRID.to_vec();
    vec![
        ExperimentConfig::new(GridFamily::Exponential, grid.clone(), sizes.clone()),
        ExperimentConfig::new(GridFamily::GammaShape, grid.clone(), sizes.clone()).with_fixed("scale", 2.0),
        ExperimentConfig::new(GridFamily::GammaScale, grid.clone(), sizes.clone()).with_fixed("shape", 2.0),
        ExperimentConfig::new(GridFamily::LognormalMomentsMean, grid.clone(), sizes.clone()).with_fixed("variance", 2.0),
        ExperimentConfig::new(GridFamily::LognormalMomentsVariance, grid.clone(), sizes.clone()).with_fixed("mean", 1.0),
        ExperimentConfig::new(GridFamily::WeibullScale, grid, sizes.clone()).with_fixed("shape", 2.0),
        ExperimentConfig::new(GridFamily::WeibullShape, TABLE1_WEIBULL_SHAPE_GRID.to_vec(), sizes).with_fixed("scale", 1.0),
    ]
}

/// Histogram of simulated statistics with the χ²ₙ₋₁ expected count per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub chi2_expected: f64,
}

pub fn histogram(cell: &CellSummary, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Binning("need at least one bin".into()));
    }
    if cell.statistics.is_empty() {
        return Err(Error::Binning("no statistics to bin".into()));
    }
    let df = (cell.n - 1) as f64;
    let lo = cell.statistics.iter().copied().fold(cell.lower_cutoff, f64::min);
    let hi = cell.statistics.iter().copied().fold(cell.upper_cutoff, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &d in &cell.statistics {
        counts[(((d - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let total = cell.statistics.len() as f64;
    let cdf = |x: f64| crate::special::gamma_p(0.5 * df, 0.5 * x.max(0.0));
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let lower = lo + i as f64 * width;
            let upper = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
            HistogramBin { lower, upper, count, chi2_expected: total * (cdf(upper) - cdf(lower)) }
        })
        .collect())
}
