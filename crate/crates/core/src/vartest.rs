//! The variance-ratio statistic and the theory that decides when its χ²
//! reference distribution is legitimate.
//!
//! `D = Σ (xᵢ - x̄)² / σ̂²` where `σ̂²` is the population variance of a model
//! fitted by maximum likelihood. When the model's variance is a function `f`
//! of its mean, the delta method gives `Var(D)/n → α` with
//!
//! ```text
//! α = [σ⁶ f'(μ)² - 2 f(μ) σ² μ₃ f'(μ) + f(μ)² (μ₄ - σ⁴)] / f(μ)⁴
//! ```
//!
//! and `D` behaves like `χ²ₙ₋₁` only when `α ≈ 2`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, MomentSet};
use crate::error::{Error, Result};
use crate::special::norm_sf;

/// Relative mismatch allowed between `f(μ)` and `σ²`.
pub const MODEL_CONSISTENCY_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_VALIDITY_TOLERANCE: f64 = 0.1;
/// Relative step of the central finite difference used when no analytic
/// derivative is supplied.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Statistic and p-value
// ---------------------------------------------------------------------------

/// Degrees-of-freedom convention for the normal approximation
/// `√(2D) - √(2ν - 1) ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DfConvention {
    /// `ν = n`; reproduces the √217 used with 109 observations.
    #[default]
    N,
    /// `ν = n - 1`, the classical "one less than the sample size".
    NMinus1,
}

impl DfConvention {
    pub fn nu(self, n: usize) -> f64 {
        match self {
            DfConvention::N => n as f64,
            DfConvention::NMinus1 => n as f64 - 1.0,
        }
    }
}

impl fmt::Display for DfConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DfConvention::N => "n",
            DfConvention::NMinus1 => "n-1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarTestOutcome {
    pub statistic_d: f64,
    pub n: usize,
    pub df_convention: DfConvention,
    pub p_value_mooley: f64,
}

/// `Σ (xᵢ - x̄)² / variance_estimate`. Exactly zero for constant data.
pub fn statistic_d(data: &[f64], variance_estimate: f64) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 observations, got {}",
            data.len()
        )));
    }
    if !(variance_estimate > 0.0 && variance_estimate.is_finite()) {
        return Err(Error::domain("statistic_d", variance_estimate, "variance estimate > 0"));
    }
    if let Some((index, &value)) = data.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::Data { index, value, reason: "not a finite number" });
    }
    Ok(sum_sq_dev(data) / variance_estimate)
}

pub(crate) fn sum_sq_dev(data: &[f64]) -> f64 {
    let first = data[0];
    if data.iter().all(|&x| x == first) {
        return 0.0;
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    data.iter().map(|&x| (x - mean) * (x - mean)).sum()
}

/// Two-sided p-value `2(1 - Φ(|√(2D) - √(2ν - 1)|))`.
pub fn mooley_pvalue(d: f64, n: usize, convention: DfConvention) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::domain("mooley_pvalue", d, "D >= 0"));
    }
    if n < 2 {
        return Err(Error::domain("mooley_pvalue", n as f64, "n >= 2"));
    }
    let z = (2.0 * d).sqrt() - (2.0 * convention.nu(n) - 1.0).sqrt();
    Ok((2.0 * norm_sf(z.abs())).min(1.0))
}

pub fn var_test(data: &[f64], variance_estimate: f64, convention: DfConvention) -> Result<VarTestOutcome> {
    let d = statistic_d(data, variance_estimate)?;
    Ok(VarTestOutcome {
        statistic_d: d,
        n: data.len(),
        df_convention: convention,
        p_value_mooley: mooley_pvalue(d, data.len(), convention)?,
    })
}

// ---------------------------------------------------------------------------
// Exact moments under the exponential null
// ---------------------------------------------------------------------------

/// `E(D) = (n-1) n / (n+1)` for exponential data with the MLE plug-in.
pub fn theorem1_mean(n: usize) -> f64 {
    let n = n as f64;
    (n - 1.0) * n / (n + 1.0)
}

/// `Var(D) = 4(n-1) / ((1 + 1/n)² (1 + 2/n) (1 + 3/n))` for exponential data
/// with the MLE plug-in. Conditionally on the total this does not depend on
/// the total, so it is also the unconditional variance.
pub fn theorem1_variance(n: usize) -> f64 {
    let n = n as f64;
    let a = 1.0 + 1.0 / n;
    4.0 * (n - 1.0) / (a * a * (1.0 + 2.0 / n) * (1.0 + 3.0 / n))
}

/// Conditional moments of `S² = Σ (Xᵢ - X̄)²` given the total `T = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMoments {
    pub es2_given_t: f64,
    pub es4_given_t: f64,
}

/// `E(S² | T=t) = (n-1) t² / (n(n+1))` and
/// `E(S⁴ | T=t) = (n-1)(n²+7n-6) Γ(n) t⁴ / (n Γ(n+4))`.
pub fn exp_conditional_moments(n: usize, t: f64) -> Result<ConditionalMoments> {
    if n < 2 {
        return Err(Error::domain("exp_conditional_moments", n as f64, "n >= 2"));
    }
    if !(t > 0.0) {
        return Err(Error::domain("exp_conditional_moments", t, "t > 0"));
    }
    let nf = n as f64;
    let t2 = t * t;
    // Γ(n)/Γ(n+4) = 1/(n(n+1)(n+2)(n+3))
    let rising = nf * (nf + 1.0) * (nf + 2.0) * (nf + 3.0);
    Ok(ConditionalMoments {
        es2_given_t: (nf - 1.0) / (nf * (nf + 1.0)) * t2,
        es4_given_t: (nf - 1.0) * (nf * nf + 7.0 * nf - 6.0) / (nf * rising) * t2 * t2,
    })
}

/// Unconditional `(E(S²), E(S⁴))` for an exponential sample with mean `λ`.
pub fn exp_unconditional_moments(n: usize, lambda: f64) -> (f64, f64) {
    let nf = n as f64;
    let l2 = lambda * lambda;
    ((nf - 1.0) * l2, (nf - 1.0) * (nf * nf + 7.0 * nf - 6.0) / nf * l2 * l2)
}

// ---------------------------------------------------------------------------
// Validity criterion
// ---------------------------------------------------------------------------

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Population variance written as a function of the population mean, with
/// its derivative.
#[derive(Clone)]
pub struct VarianceFunction {
    name: String,
    f: RealFn,
    df: Option<RealFn>,
}

impl fmt::Debug for VarianceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VarianceFunction")
            .field("name", &self.name)
            .field("analytic_derivative", &self.df.is_some())
            .finish()
    }
}

impl VarianceFunction {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: derivative.map(|d| Arc::from(d) as RealFn),
        }
    }

    /// `f(x) = x`
    pub fn poisson() -> Self {
        Self::new("x", |x| x, Some(Box::new(|_| 1.0)))
    }

    /// `f(x) = x(M - x)/M`
    pub fn binomial(size: u64) -> Self {
        let m = size as f64;
        Self::new(
            format!("x({m}-x)/{m}"),
            move |x| x * (m - x) / m,
            Some(Box::new(move |x| (m - 2.0 * x) / m)),
        )
    }

    /// `f(x) = x²`
    pub fn exponential() -> Self {
        Self::scale_family(1.0)
    }

    /// `f(x) = x²/k` for a gamma family with known shape `k`.
    pub fn gamma_known_shape(shape: f64) -> Self {
        Self::scale_family(1.0 / shape)
    }

    /// `f(x) = c x²`: any scale family with its shape held fixed, where `c`
    /// is the squared coefficient of variation.
    pub fn scale_family(cv2: f64) -> Self {
        Self::new(
            if cv2 == 1.0 { "x^2".to_string() } else { format!("{cv2}*x^2") },
            move |x| cv2 * x * x,
            Some(Box::new(move |x| 2.0 * cv2 * x)),
        )
    }

    /// The same function with its analytic derivative dropped, so that
    /// [`VarianceFunction::derivative`] falls back to finite differences.
    pub fn without_analytic_derivative(&self) -> Self {
        Self { name: self.name.clone(), f: self.f.clone(), df: None }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.df.is_some()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.df {
            Some(df) => df(x),
            None => {
                let h = FINITE_DIFFERENCE_STEP * x.abs().max(1.0);
                ((self.f)(x + h) - (self.f)(x - h)) / (2.0 * h)
            }
        }
    }
}

/// Which cross term to use in the α formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossTerm {
    /// `2 f(μ) σ² μ₃ f'(μ)`, the delta-method result.
    #[default]
    DeltaMethod,
    /// `2 μ σ² μ₃ f'(μ)` exactly as it is commonly printed. Not dimensionally
    /// consistent; kept only to document the discrepancy.
    AsPrinted,
}

/// Asymptotic `Var(D)/n` from the delta method.
pub fn alpha_condition(m: &MomentSet, f: &VarianceFunction) -> Result<f64> {
    alpha_condition_with(m, f, CrossTerm::DeltaMethod)
}

pub fn alpha_condition_with(m: &MomentSet, f: &VarianceFunction, cross: CrossTerm) -> Result<f64> {
    let fm = f.evaluate(m.mu);
    if !(fm > 0.0 && fm.is_finite()) {
        return Err(Error::domain("alpha_condition", fm, "f(mu) > 0"));
    }
    if (fm - m.sigma2).abs() > MODEL_CONSISTENCY_TOLERANCE * m.sigma2.abs() {
        return Err(Error::ModelInconsistency { got: fm, expected: m.sigma2 });
    }
    let dfm = f.derivative(m.mu);
    let s2 = m.sigma2;
    let cross_factor = match cross {
        CrossTerm::DeltaMethod => fm,
        CrossTerm::AsPrinted => m.mu,
    };
    let numerator = s2 * s2 * s2 * dfm * dfm - 2.0 * cross_factor * s2 * m.mu3 * dfm
        + fm * fm * (m.mu4 - s2 * s2);
    Ok(numerator / (fm * fm * fm * fm))
}

/// Variance function of a fitted model. Two-parameter families are treated
/// as scale families with the shape held at its fitted value.
pub fn variance_function_for(spec: &DistributionSpec) -> Result<VarianceFunction> {
    let m = spec.moments()?;
    match *spec {
        DistributionSpec::Poisson { .. } => Ok(VarianceFunction::poisson()),
        DistributionSpec::Binomial { size, .. } => Ok(VarianceFunction::binomial(size)),
        DistributionSpec::Exponential { .. } => Ok(VarianceFunction::exponential()),
        DistributionSpec::Gamma { shape, .. } => Ok(VarianceFunction::gamma_known_shape(shape)),
        DistributionSpec::Weibull { .. } | DistributionSpec::LogNormal { .. } => {
            Ok(VarianceFunction::scale_family(m.sigma2 / (m.mu * m.mu)))
        }
        DistributionSpec::GammaMixture { .. } | DistributionSpec::Uniform { .. } => {
            Err(Error::Unsupported("a variance function"))
        }
    }
}

/// Validity verdict for referring D to χ²ₙ₋₁ when `spec` is the fitted model.
pub fn model_validity(spec: &DistributionSpec, tolerance: f64) -> Result<ValidityVerdict> {
    let f = variance_function_for(spec)?;
    Ok(validity_verdict(alpha_condition(&spec.moments()?, &f)?, tolerance))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub alpha: f64,
    pub tolerance: f64,
    /// `|alpha - 2| <= tolerance`
    pub valid: bool,
}

pub fn validity_verdict(alpha: f64, tolerance: f64) -> ValidityVerdict {
    ValidityVerdict { alpha, tolerance, valid: (alpha - 2.0).abs() <= tolerance }
}
