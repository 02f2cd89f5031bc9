//! Normal, chi-square and Kolmogorov distribution helpers.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::Scalar;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn std_normal_pdf<T: Scalar>(x: T) -> T {
    let x = x.f64();
    T::lit(INV_SQRT_2PI * (-0.5 * x * x).exp())
}

/// Standard normal distribution function.
pub fn std_normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5 * erfc(-x.f64() / SQRT_2))
}

/// Standard normal survival function, accurate in the upper tail.
pub fn std_normal_sf<T: Scalar>(x: T) -> T {
    T::lit(0.5 * erfc(x.f64() / SQRT_2))
}

/// Standard normal quantile. Returns `-inf` at 0 and `+inf` at 1.
pub fn std_normal_quantile<T: Scalar>(p: T) -> T {
    let p = p.f64();
    if p <= 0.0 {
        return T::neg_infinity();
    }
    if p >= 1.0 {
        return T::infinity();
    }
    T::lit(-SQRT_2 * erfc_inv(2.0 * p))
}

/// Two-sided p-value `2(1 − Φ(|z|))`.
pub fn two_sided_p<T: Scalar>(z: T) -> T {
    (T::lit(2.0) * std_normal_sf(z.abs())).min(T::one())
}

/// One-sided (right tail) p-value `1 − Φ(z)`.
pub fn one_sided_p<T: Scalar>(z: T) -> T {
    std_normal_sf(z)
}

/// Survival function of the chi-square distribution with `2k` degrees of
/// freedom, `exp(−x/2) Σ_{j<k} (x/2)^j / j!`, summed in log space.
pub fn chi2_even_sf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let half = 0.5 * x;
    let ln_half = half.ln();
    let mut log_terms = Vec::with_capacity(k);
    let mut ln_fact = 0.0;
    for j in 0..k {
        if j > 0 {
            ln_fact += (j as f64).ln();
        }
        log_terms.push(-half + j as f64 * ln_half - ln_fact);
    }
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// Harmonic number `H_n = Σ_{i=1..n} 1/i`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Kolmogorov–Smirnov distance between the empirical distribution of `u`
/// and the uniform distribution on [0, 1].
pub fn ks_uniform_statistic(u: &[f64]) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // small-argument form of the theta series
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=7)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (c * m * m).exp()
            })
            .sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Scaling of the KS distance used with the asymptotic distribution
/// (Stephens' small-sample adjustment).
fn ks_effective_sqrt_n(n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    rn + 0.12 + 0.11 / rn
}

/// Approximate p-value of the one-sample KS test for sample size `n`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    kolmogorov_sf(ks_effective_sqrt_n(n) * d)
}

/// Critical KS distance at the 5% level for sample size `n`.
pub fn ks_critical_5pct(n: usize) -> f64 {
    1.358_098_4 / ks_effective_sqrt_n(n)
}
