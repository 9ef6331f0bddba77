//! Exact rational oracle for the moments of D under an exponential null.
//!
//! Given the total `T`, `U = X/T` is uniform on the simplex (Dirichlet with
//! all parameters one), so `D = S²/X̄² = n² (Σ Uᵢ² - 1/n)` and
//! `E ∏ Uᵢ^aᵢ = (n-1)! ∏ aᵢ! / (n-1+Σaᵢ)!`. Nothing here reuses the closed
//! forms under test.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn factorial(k: u64) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `E ∏ Uᵢ^aᵢ` for a Dirichlet(1, …, 1) vector of length `n`.
fn dirichlet_moment(n: u64, powers: &[u64]) -> BigRational {
    let total: u64 = powers.iter().sum();
    let num = factorial(n - 1) * powers.iter().map(|&a| factorial(a)).product::<BigInt>();
    BigRational::new(num, factorial(n - 1 + total))
}

/// `(E Σ Uᵢ², E (Σ Uᵢ²)²)`.
fn simplex_sums(n: u64) -> (BigRational, BigRational) {
    let nn = int(n);
    let first = nn.clone() * dirichlet_moment(n, &[2]);
    let second = nn.clone() * dirichlet_moment(n, &[4]) + nn.clone() * int(n - 1) * dirichlet_moment(n, &[2, 2]);
    (first, second)
}

pub struct Exact {
    pub mean: BigRational,
    pub variance: BigRational,
    /// `E(S²|T=1)` and `E(S⁴|T=1)`.
    pub es2: BigRational,
    pub es4: BigRational,
}

pub fn exact(n: u64) -> Exact {
    let (m1, m2) = simplex_sums(n);
    let inv_n = BigRational::new(BigInt::one(), BigInt::from(n));
    // S²/T² = Σ Uᵢ² - 1/n
    let es2 = m1.clone() - inv_n.clone();
    let es4 = m2.clone() - int(2) * inv_n.clone() * m1.clone() + inv_n.clone() * inv_n;
    let n2 = int(n * n);
    let mean = n2.clone() * es2.clone();
    let variance = n2.clone() * n2 * (es4.clone() - es2.clone() * es2.clone());
    Exact { mean, variance, es2, es4 }
}

pub fn f(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

