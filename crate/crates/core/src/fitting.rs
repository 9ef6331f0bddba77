//! Maximum-likelihood fitting and the plug-in variance that the variance
//! ratio statistic divides by.

use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::special::{lgamma, ln_minus_psi, psi, x_psi1_minus_one};

pub const MAX_ITERATIONS: usize = 100;
/// Relative parameter change below which an iteration counts as converged.
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Absolute tolerance on the gamma shape score `ln α - ψ(α) - s`, scaled by
/// `max(1, s)`.
pub const GAMMA_RESIDUAL_TOLERANCE: f64 = 1e-12;
pub const WEIBULL_RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const WEIBULL_SHAPE_BRACKET: (f64, f64) = (1e-3, 1e3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: DistributionSpec,
    pub log_likelihood: f64,
    /// Population variance of the fitted model.
    pub plug_in_variance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the per-observation score at the estimate.
    pub gradient_norm: f64,
}

/// Population variance of the fitted model.
pub fn plug_in_variance(fit: &FitResult) -> f64 {
    fit.spec.moments().map(|m| m.sigma2).unwrap_or(f64::NAN)
}

/// Fits `family` to `data` by maximum likelihood.
pub fn fit_mle(family: Family, data: &[f64]) -> Result<FitResult> {
    if data.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 observations, got {}",
            data.len()
        )));
    }
    check_support(family, data)?;
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;

    let (spec, iterations, converged) = match family {
        Family::Exponential => (DistributionSpec::exponential(mean)?, 0, true),
        Family::Gamma => {
            let mean_log = data.iter().map(|x| x.ln()).sum::<f64>() / n;
            let s = gamma_log_gap(mean, mean_log)?;
            let shape = solve_gamma_shape(s);
            let spec = DistributionSpec::Gamma { shape: shape.value, scale: mean / shape.value };
            (spec, shape.iterations, shape.converged)
        }
        Family::Weibull => {
            let sol = solve_weibull(data)?;
            let spec = DistributionSpec::Weibull { shape: sol.shape, scale: sol.scale };
            (spec, sol.iterations, sol.converged)
        }
        Family::LogNormal => {
            let mu = data.iter().map(|x| x.ln()).sum::<f64>() / n;
            let var = data.iter().map(|x| (x.ln() - mu).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::Degenerate("all observations are equal".into()));
            }
            (DistributionSpec::log_normal(mu, var.sqrt())?, 0, true)
        }
        Family::Poisson => {
            if mean <= 0.0 {
                return Err(Error::Degenerate("poisson data are all zero".into()));
            }
            (DistributionSpec::poisson(mean)?, 0, true)
        }
        Family::Binomial { size } => {
            let prob = mean / size as f64;
            if !(prob > 0.0 && prob < 1.0) {
                return Err(Error::Degenerate(format!(
                    "binomial proportion estimate {prob} is on the boundary"
                )));
            }
            (DistributionSpec::binomial(size, prob)?, 0, true)
        }
        Family::GammaMixture | Family::Uniform => return Err(Error::Unsupported("fit_mle")),
    };

    let fit = FitResult {
        log_likelihood: log_likelihood(&spec, data),
        gradient_norm: score_norm(&spec, data),
        plug_in_variance: spec.moments().map(|m| m.sigma2).unwrap_or(f64::NAN),
        spec,
        iterations,
        converged,
    };
    if fit.converged && fit.spec.validate().is_ok() {
        Ok(fit)
    } else {
        Err(Error::NoConvergence(Box::new(FitResult { converged: false, ..fit })))
    }
}

fn check_support(family: Family, data: &[f64]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        let reason = if !value.is_finite() {
            Some("not a finite number")
        } else if family.positive_support() && value <= 0.0 {
            Some("must be strictly positive")
        } else if family.is_discrete() && (value < 0.0 || value.fract() != 0.0) {
            Some("must be a non-negative integer")
        } else if let Family::Binomial { size } = family {
            (value > size as f64).then_some("exceeds the binomial size")
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(Error::Data { index, value, reason });
        }
    }
    Ok(())
}

fn gamma_log_gap(mean_x: f64, mean_log_x: f64) -> Result<f64> {
    let s = mean_x.ln() - mean_log_x;
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Degenerate(format!(
            "ln(mean) - mean(ln x) = {s}; data are constant or invalid"
        )))
    }
}

struct Solved {
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Solves `ln α - ψ(α) = s` by Newton's method on `ln α`, started from Thom's
/// approximation.
fn solve_gamma_shape(s: f64) -> Solved {
    let mut shape = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    let tol = GAMMA_RESIDUAL_TOLERANCE * s.max(1.0);
    for it in 1..=MAX_ITERATIONS {
        let r = ln_minus_psi(shape) - s;
        // d(ln α - ψ(α)) / d ln α = 1 - α ψ'(α)
        let slope = -x_psi1_minus_one(shape);
        let next = (shape.ln() - r / slope).exp();
        let step = (next - shape).abs() / next;
        shape = next;
        if step < STEP_TOLERANCE && (ln_minus_psi(shape) - s).abs() <= tol {
            return Solved { value: shape, iterations: it, converged: true };
        }
    }
    Solved { value: shape, iterations: MAX_ITERATIONS, converged: false }
}

/// Gamma MLE from the sufficient statistics `mean(x)` and `mean(ln x)`.
/// Returns `(shape, scale)`.
pub fn gamma_mle_solve(mean_x: f64, mean_log_x: f64) -> Result<(f64, f64)> {
    let s = gamma_log_gap(mean_x, mean_log_x)?;
    let sol = solve_gamma_shape(s);
    let spec = DistributionSpec::Gamma { shape: sol.value, scale: mean_x / sol.value };
    if !sol.converged {
        return Err(Error::NoConvergence(Box::new(FitResult {
            spec,
            log_likelihood: f64::NAN,
            plug_in_variance: f64::NAN,
            iterations: sol.iterations,
            converged: false,
            gradient_norm: (ln_minus_psi(sol.value) - s).abs(),
        })));
    }
    Ok((sol.value, mean_x / sol.value))
}

/// Residual of the gamma shape score equation, exposed for diagnostics.
pub fn gamma_shape_residual(shape: f64, mean_x: f64, mean_log_x: f64) -> f64 {
    ln_minus_psi(shape) - (mean_x.ln() - mean_log_x)
}

struct WeibullSolution {
    shape: f64,
    scale: f64,
    iterations: usize,
    converged: bool,
}

/// Log-data shifted so the maximum is zero; the shape score is invariant
/// under this shift and `exp(k t)` can no longer overflow.
struct ShiftedLogs {
    t: Vec<f64>,
    shift: f64,
    mean_t: f64,
}

impl ShiftedLogs {
    fn new(data: &[f64]) -> Self {
        let logs: Vec<f64> = data.iter().map(|x| x.ln()).collect();
        let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let t: Vec<f64> = logs.iter().map(|l| l - shift).collect();
        let mean_t = t.iter().sum::<f64>() / t.len() as f64;
        Self { t, shift, mean_t }
    }

    /// Profile score `h(k)` and its derivative.
    fn score(&self, k: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &t in &self.t {
            let w = (k * t).exp();
            s0 += w;
            s1 += w * t;
            s2 += w * t * t;
        }
        let ratio = s1 / s0;
        let h = ratio - 1.0 / k - self.mean_t;
        let dh = s2 / s0 - ratio * ratio + 1.0 / (k * k);
        (h, dh)
    }

    fn scale(&self, k: f64) -> f64 {
        let mean_w = self.t.iter().map(|&t| (k * t).exp()).sum::<f64>() / self.t.len() as f64;
        (self.shift + mean_w.ln() / k).exp()
    }
}

/// Weibull MLE: safeguarded Newton on the profile score
/// `Σ xᵏ ln x / Σ xᵏ - 1/k - mean(ln x) = 0`. Returns `(shape, scale)`.
pub fn weibull_mle_solve(data: &[f64]) -> Result<(f64, f64)> {
    if data.len() < 2 {
        return Err(Error::Degenerate("need at least 2 observations".into()));
    }
    check_support(Family::Weibull, data)?;
    let sol = solve_weibull(data)?;
    if !sol.converged {
        let spec = DistributionSpec::Weibull { shape: sol.shape, scale: sol.scale };
        return Err(Error::NoConvergence(Box::new(FitResult {
            log_likelihood: f64::NAN,
            plug_in_variance: f64::NAN,
            gradient_norm: ShiftedLogs::new(data).score(sol.shape).0.abs(),
            spec,
            iterations: sol.iterations,
            converged: false,
        })));
    }
    Ok((sol.shape, sol.scale))
}

/// Value of the Weibull profile score at `shape`.
pub fn weibull_shape_residual(data: &[f64], shape: f64) -> f64 {
    ShiftedLogs::new(data).score(shape).0
}

fn solve_weibull(data: &[f64]) -> Result<WeibullSolution> {
    if data.iter().all(|&x| x == data[0]) {
        return Err(Error::Degenerate("all observations are equal".into()));
    }
    let logs = ShiftedLogs::new(data);
    let (mut lo, mut hi) = WEIBULL_SHAPE_BRACKET;
    if logs.score(lo).0 > 0.0 || logs.score(hi).0 < 0.0 {
        return Err(Error::Bracket(format!(
            "weibull shape root outside [{lo}, {hi}]"
        )));
    }

    // Start from the log-moment estimate sd(ln X) = π / (k √6).
    let n = logs.t.len() as f64;
    let sd = (logs.t.iter().map(|t| (t - logs.mean_t).powi(2)).sum::<f64>() / n).sqrt();
    let mut k = (std::f64::consts::PI / (6f64.sqrt() * sd)).clamp(lo * 1.01, hi * 0.99);

    for it in 1..=MAX_ITERATIONS {
        let (h, dh) = logs.score(k);
        if h < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let mut next = k - h / dh;
        if !(next > lo && next < hi) {
            // Bisect in log space; the bracket spans six orders of magnitude.
            next = (lo * hi).sqrt();
        }
        let step = (next - k).abs() / next;
        k = next;
        if step < STEP_TOLERANCE {
            let residual = logs.score(k).0;
            if residual.abs() < WEIBULL_RESIDUAL_TOLERANCE {
                return Ok(WeibullSolution { shape: k, scale: logs.scale(k), iterations: it, converged: true });
            }
        }
    }
    Ok(WeibullSolution { shape: k, scale: logs.scale(k), iterations: MAX_ITERATIONS, converged: false })
}

fn log_likelihood(spec: &DistributionSpec, data: &[f64]) -> f64 {
    let n = data.len() as f64;
    match *spec {
        DistributionSpec::Exponential { mean } => -n * mean.ln() - data.iter().sum::<f64>() / mean,
        DistributionSpec::Gamma { shape, scale } => data
            .iter()
            .map(|&x| (shape - 1.0) * x.ln() - x / scale)
            .sum::<f64>()
            - n * (shape * scale.ln() + lgamma(shape)),
        DistributionSpec::Weibull { shape, scale } => data
            .iter()
            .map(|&x| (shape - 1.0) * x.ln() - (x / scale).powf(shape))
            .sum::<f64>()
            + n * (shape.ln() - shape * scale.ln()),
        DistributionSpec::LogNormal { log_mean, log_sd } => {
            let ss: f64 = data.iter().map(|&x| x.ln()).map(|l| (l - log_mean).powi(2)).sum();
            -data.iter().map(|x| x.ln()).sum::<f64>()
                - n * (log_sd.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
                - ss / (2.0 * log_sd * log_sd)
        }
        _ => data.iter().map(|&x| spec.pdf(x).map(f64::ln).unwrap_or(f64::NAN)).sum(),
    }
}

fn score_norm(spec: &DistributionSpec, data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let sum_x: f64 = data.iter().sum();
    let grad: Vec<f64> = match *spec {
        DistributionSpec::Exponential { mean } => vec![-n / mean + sum_x / (mean * mean)],
        DistributionSpec::Gamma { shape, scale } => {
            let sum_log: f64 = data.iter().map(|x| x.ln()).sum();
            vec![
                sum_log - n * scale.ln() - n * psi(shape),
                sum_x / (scale * scale) - n * shape / scale,
            ]
        }
        DistributionSpec::Weibull { shape, scale } => {
            let (mut a, mut b) = (0.0, 0.0);
            for &x in data {
                let z = x / scale;
                let zk = z.powf(shape);
                a += z.ln() * (1.0 - zk);
                b += zk;
            }
            vec![n / shape + a, shape / scale * (b - n)]
        }
        DistributionSpec::LogNormal { log_mean, log_sd } => {
            let (mut a, mut b) = (0.0, 0.0);
            for &x in data {
                let d = x.ln() - log_mean;
                a += d;
                b += d * d;
            }
            let v = log_sd * log_sd;
            vec![a / v, -n / log_sd + b / (v * log_sd)]
        }
        DistributionSpec::Poisson { mean } => vec![sum_x / mean - n],
        DistributionSpec::Binomial { size, prob } => {
            vec![sum_x / prob - (n * size as f64 - sum_x) / (1.0 - prob)]
        }
        _ => vec![f64::NAN],
    };
    grad.iter().map(|g| g * g).sum::<f64>().sqrt() / n
}
