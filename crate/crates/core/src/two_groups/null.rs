//! Null-proportion estimation, empirical-null fitting and diagnostics of an
//! assumed null distribution.

use serde::{Deserialize, Serialize};

use super::density::quantile_sorted;
use super::NormalSpec;
use crate::dist::{
    ks_critical_5pct, ks_pvalue, ks_uniform_statistic, std_normal_cdf, std_normal_quantile,
    two_sided_p,
};
use crate::error::{Error, Result};
use crate::procedures::{Level, PValueSet};
use crate::scalar::cmp_asc;
use crate::Scalar;

/// Threshold-count estimator `min(1, #{p_i > λ} / (n (1 − λ)))`.
pub fn estimate_p0_lambda<T: Scalar>(p: &PValueSet<T>, lambda: T) -> Result<T> {
    if !(lambda > T::zero() && lambda < T::one()) {
        return Err(Error::invalid(format!("lambda = {lambda} outside (0, 1)")));
    }
    if p.is_empty() {
        return Err(Error::invalid("cannot estimate p0 from an empty set"));
    }
    let above = p.values().iter().filter(|&&v| v > lambda).count();
    let raw = T::count(above) / (T::count(p.len()) * (T::one() - lambda));
    Ok(raw.min(T::one()))
}

/// Bound on the number of true nulls after `r1` stage-one rejections,
/// `n − r1 (1 − q)`.
pub fn p0_bound_two_stage<T: Scalar>(n: usize, r1: usize, q: Level<T>) -> Result<T> {
    if r1 > n {
        return Err(Error::invalid(format!("r1 = {r1} exceeds n = {n}")));
    }
    Ok(T::count(n) - T::count(r1) * (T::one() - q.get()))
}

/// Result of central matching: the fitted null and the null proportion
/// implied by the central window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNullFit<T> {
    pub null: NormalSpec<T>,
    pub p0: T,
    pub iterations: usize,
}

/// Half-width, in fitted scales, of the window used to count null mass.
const COUNT_WINDOW: f64 = 2.0;
const MAX_ITERATIONS: usize = 200;

/// Fits a normal null by central matching on the observations between the
/// empirical `central_range` quantiles.
///
/// The location is the mean of the central observations. The scale matches
/// the central quantile spacing to the normal spacing, corrected for the
/// share of the central window taken by non-null cases: the spacing is
/// divided by `Φ⁻¹(½ + (hi − ½)/p0) − Φ⁻¹(½ − (½ − lo)/p0)`, where `p0` is
/// re-estimated from the count within `±2` fitted scales until the scale
/// settles.
pub fn fit_empirical_null<T: Scalar>(
    z_values: &[T],
    central_range: (T, T),
) -> Result<EmpiricalNullFit<T>> {
    let (lo_q, hi_q) = central_range;
    if z_values.len() < 100 {
        return Err(Error::invalid(format!(
            "empirical null needs at least 100 z-values, got {}",
            z_values.len()
        )));
    }
    if !(lo_q > T::zero() && lo_q < hi_q && hi_q < T::one()) {
        return Err(Error::invalid(format!(
            "central range ({lo_q}, {hi_q}) is not inside (0, 1)"
        )));
    }
    if z_values.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("z-values must be finite"));
    }
    let mut sorted = z_values.to_vec();
    sorted.sort_by(cmp_asc);
    let a = quantile_sorted(&sorted, lo_q);
    let b = quantile_sorted(&sorted, hi_q);
    let spacing = b - a;
    if spacing.f64() <= f64::EPSILON * (a.abs() + b.abs()).f64().max(1.0) {
        return Err(Error::Fitting(format!(
            "central spread is zero (quantiles {a} and {b})"
        )));
    }
    let central: Vec<T> = sorted
        .iter()
        .copied()
        .filter(|&z| z >= a && z <= b)
        .collect();
    let location = central.iter().copied().sum::<T>() / T::count(central.len());

    let half = T::lit(0.5);
    let upper = hi_q - half;
    let lower = half - lo_q;
    // p0 must leave both adjusted quantile levels inside (0, 1)
    let p0_floor = (T::lit(2.0) * upper.max(lower)).max(T::lit(1e-6)) * T::lit(1.0 + 1e-9);
    let window_mass = T::lit(2.0) * std_normal_cdf(T::lit(COUNT_WINDOW)) - T::one();
    let n_t = T::count(sorted.len());

    let scale_for = |p0: T| {
        spacing / (std_normal_quantile(half + upper / p0) - std_normal_quantile(half - lower / p0))
    };
    let mut p0 = T::one();
    let mut scale = scale_for(p0);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let w = T::lit(COUNT_WINDOW) * scale;
        let inside = sorted.partition_point(|&z| z <= location + w)
            - sorted.partition_point(|&z| z < location - w);
        p0 = (T::count(inside) / (n_t * window_mass))
            .min(T::one())
            .max(p0_floor);
        let next = scale_for(p0);
        let settled = (next - scale).abs() <= T::lit(1e-12) * scale;
        scale = next;
        if settled {
            break;
        }
    }
    if !(scale.is_finite() && scale > T::zero()) {
        return Err(Error::Fitting(format!(
            "scale iteration diverged ({scale})"
        )));
    }
    Ok(EmpiricalNullFit {
        null: NormalSpec { location, scale },
        p0,
        iterations,
    })
}

/// Diagnostics of z-values against an assumed null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullDiagnostics<T> {
    pub n: usize,
    /// Fraction of z within one null scale of the null location.
    pub central_fraction: T,
    /// The same fraction under the assumed null, `2Φ(1) − 1`.
    pub expected_central_fraction: T,
    /// `expected_central_fraction − central_fraction`; positive for a dip.
    pub dip_statistic: T,
    /// KS distance of the two-sided null p-values from uniform.
    pub ks_statistic: T,
    pub ks_pvalue: T,
    pub ks_critical_5pct: T,
}

impl<T: Scalar> NullDiagnostics<T> {
    /// True when the KS test rejects uniformity at the 5% level.
    pub fn rejects_uniformity(&self) -> bool {
        self.ks_pvalue < T::lit(0.05)
    }

    /// Key-value pairs for flat serialization.
    pub fn records(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.n.to_string()),
            ("central_fraction", self.central_fraction.to_string()),
            (
                "expected_central_fraction",
                self.expected_central_fraction.to_string(),
            ),
            ("dip_statistic", self.dip_statistic.to_string()),
            ("ks_statistic", self.ks_statistic.to_string()),
            ("ks_pvalue", self.ks_pvalue.to_string()),
            ("ks_critical_5pct", self.ks_critical_5pct.to_string()),
        ]
    }
}

pub fn diagnose_null<T: Scalar>(
    z_values: &[T],
    assumed_null: &NormalSpec<T>,
) -> Result<NullDiagnostics<T>> {
    if z_values.is_empty() {
        return Err(Error::invalid("diagnostics need at least one z-value"));
    }
    let n = z_values.len();
    let standardized: Vec<T> = z_values
        .iter()
        .map(|&z| (z - assumed_null.location) / assumed_null.scale)
        .collect();
    let central = standardized.iter().filter(|u| u.abs() <= T::one()).count();
    let central_fraction = T::count(central) / T::count(n);
    let expected = T::lit(2.0) * std_normal_cdf(T::one()) - T::one();
    let p: Vec<f64> = standardized.iter().map(|&u| two_sided_p(u).f64()).collect();
    let d = ks_uniform_statistic(&p);
    Ok(NullDiagnostics {
        n,
        central_fraction,
        expected_central_fraction: expected,
        dip_statistic: expected - central_fraction,
        ks_statistic: T::lit(d),
        ks_pvalue: T::lit(ks_pvalue(d, n)),
        ks_critical_5pct: T::lit(ks_critical_5pct(n)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn p0_lambda_worked_example() {
        let p = PValueSet::new(vec![0.8, 0.9, 0.2, 0.7]).unwrap();
        // raw 3 / (4 * 0.5) = 1.5, clamped
        assert_eq!(estimate_p0_lambda(&p, 0.5).unwrap(), 1.0);
        let zeros = PValueSet::new(vec![0.0; 10]).unwrap();
        assert_eq!(estimate_p0_lambda(&zeros, 0.5).unwrap(), 0.0);
        assert!(estimate_p0_lambda(&p, 0.0).is_err());
        assert!(estimate_p0_lambda(&p, 1.0).is_err());
    }

    #[test]
    fn two_stage_bound_examples() {
        let q = Level::new(0.05_f64).unwrap();
        assert_eq!(p0_bound_two_stage(100, 0, q).unwrap(), 100.0);
        assert!((p0_bound_two_stage(100, 100, q).unwrap() - 5.0).abs() < 1e-12);
        assert!((p0_bound_two_stage(4, 2, q).unwrap() - 2.1).abs() < 1e-12);
        assert!(p0_bound_two_stage(3, 4, q).is_err());
    }

    #[test]
    fn empirical_null_on_pure_null() {
        let z = normals(100_000, 11);
        let fit = fit_empirical_null(&z, (0.25, 0.75)).unwrap();
        assert!(fit.null.location.abs() < 0.02, "{fit:?}");
        assert!((fit.null.scale - 1.0).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn empirical_null_tracks_shift() {
        let z: Vec<f64> = normals(20_000, 12).into_iter().map(|x| x + 0.5).collect();
        let fit = fit_empirical_null(&z, (0.25, 0.75)).unwrap();
        assert!((fit.null.location - 0.5).abs() < 0.03);
    }

    #[test]
    fn empirical_null_errors() {
        assert!(fit_empirical_null(&vec![1.0; 200], (0.25, 0.75)).is_err());
        assert!(matches!(
            fit_empirical_null(&vec![1.0; 200], (0.25, 0.75)),
            Err(Error::Fitting(_))
        ));
        assert!(fit_empirical_null(&normals(50, 1), (0.25, 0.75)).is_err());
        assert!(fit_empirical_null(&normals(500, 1), (0.75, 0.25)).is_err());
    }

    #[test]
    fn diagnostics_scale_mismatch() {
        let z: Vec<f64> = normals(100_000, 13).into_iter().map(|x| 2.0 * x).collect();
        let d = diagnose_null(&z, &NormalSpec::standard()).unwrap();
        // Φ(0.5) − Φ(−0.5) and Φ(1) − Φ(−1)
        assert!((d.central_fraction - 0.382_924_922_548_026).abs() < 0.01);
        assert!((d.expected_central_fraction - 0.682_689_492_137_086).abs() < 1e-12);
        assert!(d.rejects_uniformity());
    }

    #[test]
    fn diagnostics_correct_null() {
        let z = normals(20_000, 14);
        let d = diagnose_null(&z, &NormalSpec::standard()).unwrap();
        assert!(d.dip_statistic.abs() < 0.015);
        assert!(d.ks_statistic < d.ks_critical_5pct);
        assert!(diagnose_null::<f64>(&[], &NormalSpec::standard()).is_err());
    }
}
