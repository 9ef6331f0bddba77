#![allow(dead_code)]

pub mod exact;

use dispersia::DistributionSpec;

/// `∫₀^∞ g(x) dx` by double-exponential quadrature,
/// `x = s·exp(t - e^{-t})`, which tolerates integrable endpoint
/// singularities and slowly decaying tails. `s` sets the scale of the bulk.
pub fn integrate_half_line(g: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = 1.0 / 128.0;
    let mut total = 0.0;
    let mut k = -(12.0 / h) as i64;
    while (k as f64) * h <= 12.0 {
        let t = k as f64 * h;
        let e = (-t).exp();
        let x = s * (t - e).exp();
        if x > 0.0 && x.is_finite() {
            let w = x * (1.0 + e);
            let v = g(x) * w;
            if v.is_finite() {
                total += v;
            }
        }
        k += 1;
    }
    total * h
}

/// `∫ₐᵇ g(x) dx` by tanh-sinh quadrature.
pub fn integrate_interval(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 1.0 / 128.0;
    let half = 0.5 * (b - a);
    let mut total = 0.0;
    let mut k = -(4.0 / h) as i64;
    while (k as f64) * h <= 4.0 {
        let t = k as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (u.cosh() * u.cosh());
        // Distance to the nearer endpoint, computed without cancellation.
        let e = (-2.0 * u.abs()).exp();
        let dist = 2.0 * half * e / (1.0 + e);
        let x = if u < 0.0 { a + dist } else { b - dist };
        if x > a && x < b {
            total += g(x) * w;
        }
        k += 1;
    }
    total * h * half
}

/// A characteristic scale for placing the quadrature nodes.
pub fn bulk_scale(spec: &DistributionSpec) -> f64 {
    match *spec {
        DistributionSpec::Exponential { mean } => mean,
        DistributionSpec::Gamma { shape, scale } => shape * scale,
        DistributionSpec::Weibull { scale, .. } => scale,
        DistributionSpec::LogNormal { log_mean, .. } => log_mean.exp(),
        DistributionSpec::GammaMixture { ref components } => {
            components.iter().map(|c| c.weight * c.shape * c.scale).sum()
        }
        _ => 1.0,
    }
}

/// Raw moment `E[(X - c)^k]` of a continuous positive distribution.
pub fn continuous_moment(spec: &DistributionSpec, c: f64, k: i32) -> f64 {
    integrate_half_line(|x| (x - c).powi(k) * spec.pdf(x).unwrap(), bulk_scale(spec))
}

/// `(mean, variance, μ₃, μ₄)` by quadrature or by summing the mass function.
pub fn oracle_moments(spec: &DistributionSpec) -> (f64, f64, f64, f64) {
    if spec.is_discrete() {
        let upper = match *spec {
            DistributionSpec::Binomial { size, .. } => size,
            DistributionSpec::Poisson { mean } => (mean + 40.0 * mean.sqrt() + 60.0) as u64,
            _ => unreachable!(),
        };
        let pmf: Vec<(f64, f64)> = (0..=upper).map(|k| (k as f64, spec.pdf(k as f64).unwrap())).collect();
        let mu: f64 = pmf.iter().map(|(k, p)| k * p).sum();
        let central = |r: i32| pmf.iter().map(|(k, p)| (k - mu).powi(r) * p).sum::<f64>();
        return (mu, central(2), central(3), central(4));
    }
    if let DistributionSpec::Uniform { lower, upper } = *spec {
        let w = 1.0 / (upper - lower);
        let mu = integrate_interval(|x| x * w, lower, upper);
        let central = |r: i32| integrate_interval(|x| (x - mu).powi(r) * w, lower, upper);
        return (mu, central(2), central(3), central(4));
    }
    let mu = continuous_moment(spec, 0.0, 1);
    (mu, continuous_moment(spec, mu, 2), continuous_moment(spec, mu, 3), continuous_moment(spec, mu, 4))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
