//! Pearson χ² goodness of fit with equal-probability binning, and the
//! one-sample Kolmogorov–Smirnov test.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::special::gamma_q;

pub const DEFAULT_MIN_EXPECTED: f64 = 5.0;
pub const MIN_BINS: usize = 4;
pub const MAX_BINS: usize = 20;

/// Series terms below this are dropped.
const KS_SERIES_CUTOFF: f64 = 1e-12;

pub const KS_ESTIMATED_PARAMS_WARNING: &str = "parameters were estimated from the same data; \
the Kolmogorov-Smirnov p-value assumes a fully specified null and is not valid here";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    /// Degrees of freedom (χ² only).
    pub df: Option<f64>,
    pub p_value: f64,
    /// Bins (χ² only).
    pub bins: Vec<Bin>,
    pub warning: Option<String>,
}

/// Number of equal-probability bins for `n` observations:
/// `floor(n / min_expected)` clamped to `[4, 20]`.
pub fn bin_count(n: usize, min_expected: f64) -> usize {
    ((n as f64 / min_expected).floor() as usize).clamp(MIN_BINS, MAX_BINS)
}

/// Bin edges with equal model probability, including the two support
/// endpoints, so `k` bins give `k + 1` strictly increasing edges.
pub fn equal_prob_bins(spec: &DistributionSpec, n: usize, min_expected: f64) -> Result<Vec<f64>> {
    if !(min_expected > 0.0) {
        return Err(Error::Binning(format!("min_expected must be positive, got {min_expected}")));
    }
    if (n as f64) < 2.0 * min_expected {
        return Err(Error::Binning(format!(
            "{n} observations is too few for a minimum expected count of {min_expected}"
        )));
    }
    if spec.is_discrete() {
        return Err(Error::Unsupported("equal-probability binning of a discrete family"));
    }
    let k = bin_count(n, min_expected);
    let (lo, hi) = spec.support();
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(lo);
    for i in 1..k {
        edges.push(spec.quantile(i as f64 / k as f64)?);
    }
    edges.push(hi);
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Binning("bin edges are not strictly increasing".into()));
    }
    Ok(edges)
}

/// Counts observations per bin. Bin `i` is `(edges[i], edges[i+1]]`; values
/// outside the outer edges fall into the first or last bin.
pub fn bin_counts(data: &[f64], edges: &[f64]) -> Result<Vec<u64>> {
    if edges.len() < 2 {
        return Err(Error::Binning("need at least two edges".into()));
    }
    let interior = &edges[1..edges.len() - 1];
    let mut counts = vec![0u64; edges.len() - 1];
    for (index, &x) in data.iter().enumerate() {
        if x.is_nan() {
            return Err(Error::Data { index, value: x, reason: "NaN" });
        }
        counts[interior.partition_point(|&e| e < x)] += 1;
    }
    Ok(counts)
}

/// Pearson statistic from observed and expected counts.
pub fn pearson_from_counts(observed: &[u64], expected: &[f64], fitted_param_count: usize) -> Result<(f64, f64, f64)> {
    if observed.len() != expected.len() {
        return Err(Error::Binning("observed and expected lengths differ".into()));
    }
    let k = observed.len();
    if fitted_param_count + 1 >= k {
        return Err(Error::Binning(format!(
            "{k} bins leave no degrees of freedom after {fitted_param_count} fitted parameters"
        )));
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if !(e > 0.0) {
            return Err(Error::Binning("a bin has zero expected count".into()));
        }
        let d = o as f64 - e;
        stat += d * d / e;
    }
    let df = (k - 1 - fitted_param_count) as f64;
    Ok((stat, df, gamma_q(0.5 * df, 0.5 * stat)))
}

/// Pearson χ² test against `spec` using explicit bin edges.
pub fn pearson_chi2_with_edges(
    data: &[f64],
    spec: &DistributionSpec,
    edges: &[f64],
    fitted_param_count: usize,
) -> Result<GofResult> {
    let observed = bin_counts(data, edges)?;
    let n = data.len() as f64;
    let cdfs = edges.iter().map(|&e| spec.cdf(e)).collect::<Result<Vec<_>>>()?;
    let expected: Vec<f64> = cdfs.windows(2).map(|w| n * (w[1] - w[0])).collect();
    let (statistic, df, p_value) = pearson_from_counts(&observed, &expected, fitted_param_count)?;
    let bins = edges
        .windows(2)
        .zip(observed.iter().zip(&expected))
        .map(|(w, (&o, &e))| Bin { lower: w[0], upper: w[1], observed: o, expected: e })
        .collect();
    Ok(GofResult { statistic, df: Some(df), p_value, bins, warning: None })
}

/// Pearson χ² test with equal-probability bins and a minimum expected count
/// of [`DEFAULT_MIN_EXPECTED`].
pub fn pearson_chi2(data: &[f64], spec: &DistributionSpec, fitted_param_count: usize) -> Result<GofResult> {
    let edges = equal_prob_bins(spec, data.len(), DEFAULT_MIN_EXPECTED)?;
    pearson_chi2_with_edges(data, spec, &edges, fitted_param_count)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `data` and `cdf`.
pub fn ks_statistic(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Degenerate("KS statistic of an empty sample".into()));
    }
    if let Some((index, &value)) = data.iter().enumerate().find(|(_, x)| x.is_nan()) {
        return Err(Error::Data { index, value, reason: "NaN" });
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max))
}

/// Asymptotic p-value `1 - K(√n·d)` from the Kolmogorov distribution.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    kolmogorov_sf((n as f64).sqrt() * d)
}

/// `1 - K(x) = 2 Σ (-1)^(k-1) exp(-2k²x²)`. Below `x = 1` the alternating
/// series converges slowly, so the equivalent theta-function form of `K(x)`
/// is summed instead.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if x < 1.0 {
        let mut cdf = 0.0;
        let c = PI * PI / (8.0 * x * x);
        for k in 1.. {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            cdf += term;
            if term < KS_SERIES_CUTOFF {
                break;
            }
        }
        return (1.0 - (2.0 * PI).sqrt() / x * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1.. {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += sign * term;
        sign = -sign;
        if term < KS_SERIES_CUTOFF {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against `spec`. When `params_estimated` is set the
/// result carries [`KS_ESTIMATED_PARAMS_WARNING`].
pub fn ks_test(data: &[f64], spec: &DistributionSpec, params_estimated: bool) -> Result<GofResult> {
    spec.validate()?;
    let statistic = ks_statistic(data, |x| spec.cdf_unchecked(x))?;
    Ok(GofResult {
        statistic,
        df: None,
        p_value: ks_pvalue(statistic, data.len()),
        bins: Vec::new(),
        warning: params_estimated.then(|| KS_ESTIMATED_PARAMS_WARNING.to_string()),
    })
}
