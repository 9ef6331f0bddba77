//! Special functions: log-gamma, digamma, trigamma, the regularized
//! incomplete gamma function and the normal and chi-square helpers built on
//! top of them.
//!
//! The checked entry points return [`Error::Domain`] for arguments outside
//! the function's domain. The `pub(crate)` unchecked variants skip that and
//! are what the samplers and solvers call in their inner loops.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this the recurrences shift the argument upward before the
/// asymptotic series take over.
const ASYMPTOTIC_CUTOFF: f64 = 10.0;

const INCGAMMA_EPS: f64 = 1e-16;
const INCGAMMA_MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Gamma family
// ---------------------------------------------------------------------------

/// Natural logarithm of the gamma function, `ln Γ(x)`, for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain("log_gamma", x, "x > 0"));
    }
    Ok(lgamma(x))
}

pub(crate) fn lgamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= ASYMPTOTIC_CUTOFF {
        return stirling_lgamma(x);
    }
    // ln Γ(x) = ln Γ(x + m) - ln(x (x+1) ... (x+m-1))
    let mut z = x;
    let mut prod = 1.0;
    while z < ASYMPTOTIC_CUTOFF {
        prod *= z;
        z += 1.0;
    }
    stirling_lgamma(z) - prod.ln()
}

fn stirling_lgamma(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k (2k-1) z^(2k-1)), k = 1..7
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2
                                        * (1.0 / 1188.0
                                            + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series
}

/// Digamma function `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain("digamma", x, "x > 0"));
    }
    Ok(psi(x))
}

pub(crate) fn psi(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        acc -= 1.0 / x;
        x += 1.0;
    }
    acc + x.ln() - ln_minus_psi_asymptotic(x)
}

/// `ln x - ψ(x)` evaluated without the cancellation that the direct
/// difference suffers for large `x`. This is the left-hand side of the gamma
/// shape score equation.
pub(crate) fn ln_minus_psi(x: f64) -> f64 {
    if x >= ASYMPTOTIC_CUTOFF {
        ln_minus_psi_asymptotic(x)
    } else {
        x.ln() - psi(x)
    }
}

fn ln_minus_psi_asymptotic(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    0.5 * inv
        + inv2
            * (1.0 / 12.0
                + inv2
                    * (-1.0 / 120.0
                        + inv2
                            * (1.0 / 252.0
                                + inv2
                                    * (-1.0 / 240.0
                                        + inv2
                                            * (1.0 / 132.0
                                                + inv2 * (-691.0 / 32_760.0 + inv2 / 12.0))))))
}

/// `x ψ'(x) - 1`, the derivative of `ln x - ψ(x)` with respect to `ln x`
/// up to sign. Evaluated by series for large `x` where the direct form
/// cancels.
pub(crate) fn x_psi1_minus_one(x: f64) -> f64 {
    if x < ASYMPTOTIC_CUTOFF {
        return x * psi1(x) - 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    0.5 * inv
        + inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2
                            * (1.0 / 42.0
                                + inv2
                                    * (-1.0 / 30.0
                                        + inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0 + inv2 * 7.0 / 6.0))))))
}

/// Trigamma function `ψ'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain("trigamma", x, "x > 0"));
    }
    Ok(psi1(x))
}

pub(crate) fn psi1(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2
                            * (1.0 / 42.0
                                + inv2
                                    * (-1.0 / 30.0
                                        + inv2
                                            * (5.0 / 66.0
                                                + inv2 * (-691.0 / 2730.0 + inv2 * 7.0 / 6.0))))))
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma
// ---------------------------------------------------------------------------

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Uses the power series for `x < a + 1` and a Lentz continued fraction for
/// the upper function otherwise.
pub fn reg_gamma_p(a: f64, x: f64) -> Result<f64> {
    check_incgamma("reg_gamma_p", a, x)?;
    Ok(gamma_p(a, x))
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`,
/// computed directly so that small upper tails keep their relative accuracy.
pub fn reg_gamma_q(a: f64, x: f64) -> Result<f64> {
    check_incgamma("reg_gamma_q", a, x)?;
    Ok(gamma_q(a, x))
}

fn check_incgamma(function: &'static str, a: f64, x: f64) -> Result<()> {
    if a.is_nan() || a <= 0.0 || a.is_infinite() {
        return Err(Error::domain(function, a, "shape a > 0"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(function, x, "x >= 0"));
    }
    Ok(())
}

pub(crate) fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_frac(a, x)
    }
}

pub(crate) fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cont_frac(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - lgamma(a)).exp()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..INCGAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * INCGAMMA_EPS {
            break;
        }
    }
    (sum * gamma_prefactor(a, x)).clamp(0.0, 1.0)
}

fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..INCGAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < INCGAMMA_EPS {
            break;
        }
    }
    (h * gamma_prefactor(a, x)).clamp(0.0, 1.0)
}

/// Density of the unit-scale gamma distribution, used as the Newton
/// derivative when inverting `P(a, ·)`.
fn gamma_density_unit(a: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    ((a - 1.0) * y.ln() - y - lgamma(a)).exp()
}

/// Solves `P(a, y) = p` for `y`, i.e. the quantile of the unit-scale gamma
/// distribution with shape `a`.
pub fn inverse_reg_gamma_p(a: f64, p: f64) -> Result<f64> {
    if a.is_nan() || a <= 0.0 || a.is_infinite() {
        return Err(Error::domain("inverse_reg_gamma_p", a, "shape a > 0"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("inverse_reg_gamma_p", p, "0 < p < 1"));
    }
    // Work on whichever tail is smaller so the target keeps its precision.
    let lower = p <= 0.5;
    let target = if lower { p } else { 1.0 - p };
    let residual = |y: f64| {
        if lower {
            gamma_p(a, y) - target
        } else {
            target - gamma_q(a, y)
        }
    };

    let mut y = initial_gamma_quantile(a, p);
    // Bracket: residual(lo) < 0 <= residual(hi).
    let mut lo = 0.0;
    let mut hi = y.max(1e-300);
    let mut expansions = 0;
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 2100 || !hi.is_finite() {
            return Err(Error::Bracket(format!(
                "gamma quantile a={a}, p={p}: upper bracket diverged"
            )));
        }
    }
    if y <= lo || y >= hi {
        y = 0.5 * (lo + hi);
    }

    for _ in 0..400 {
        let r = residual(y);
        if r == 0.0 {
            return Ok(y);
        }
        if r < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dens = gamma_density_unit(a, y);
        let mut next = if dens > 0.0 && dens.is_finite() {
            y - r / dens
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = if lo == 0.0 && hi > 1e-290 {
                // Geometric bisection handles very small lower quantiles.
                (hi * lo.max(hi * 1e-12)).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        if (next - y).abs() <= 1e-15 * y.abs() || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        y = next;
    }
    Err(Error::Bracket(format!(
        "gamma quantile a={a}, p={p}: no convergence"
    )))
}

fn initial_gamma_quantile(a: f64, p: f64) -> f64 {
    // Wilson–Hilferty cube approximation, with a lower-tail power law fallback.
    let z = normal_quantile(p);
    let c = 1.0 / (9.0 * a);
    let wh = a * (1.0 - c + z * c.sqrt()).powi(3);
    if wh > 0.0 && wh.is_finite() && (a > 0.5 || p > 0.2) {
        wh
    } else {
        ((p.ln() + lgamma(a + 1.0)) / a).exp()
    }
}

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        1.0 + gamma_p(0.5, x * x)
    }
}

/// Standard normal CDF `Φ(z)`.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate far into the tail.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Standard normal quantile `Φ⁻¹(p)`.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("norm_quantile", p, "0 < p < 1"));
    }
    Ok(normal_quantile(p))
}

fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    let mut x = acklam(p);
    // Halley refinement against the incomplete-gamma based CDF.
    for _ in 0..2 {
        let e = norm_cdf(x) - p;
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Acklam's rational approximation, valid for `p <= 0.5`.
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

// ---------------------------------------------------------------------------
// Chi-square
// ---------------------------------------------------------------------------

/// Upper tail of the χ² distribution with `df` degrees of freedom.
pub fn chi2_sf(df: f64, x: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::domain("chi2_sf", df, "df > 0"));
    }
    if x.is_nan() {
        return Err(Error::domain("chi2_sf", x, "x not NaN"));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_q(0.5 * df, 0.5 * x))
}

/// Quantile of the χ² distribution: the `x` with `P(df/2, x/2) = p`.
pub fn chi2_quantile(df: f64, p: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 || df.is_infinite() {
        return Err(Error::domain("chi2_quantile", df, "df > 0"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("chi2_quantile", p, "0 < p < 1"));
    }
    Ok(2.0 * inverse_reg_gamma_p(0.5 * df, p)?)
}
