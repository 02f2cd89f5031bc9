//! Binned kernel estimate of the mixture density and the derived local fdr
//! curve.
//!
//! Observations are binned on a fixed grid of 512 bins spanning
//! `[min z − 1, max z + 1]`. At each grid point the mixture density is
//! smoothed with a Gaussian kernel whose bandwidth is the normal-reference
//! bandwidth, widened to the distance of the k-th nearest observation
//! (`k = ⌊N^0.6⌋`) where data are sparse. The null density is smoothed with
//! the same kernel (for a normal null this is the normal with variance
//! `σ0² + h²`), so smoothing bias cancels wherever the null dominates.

use serde::{Deserialize, Serialize};

use super::NormalSpec;
use crate::error::{Error, Result};
use crate::scalar::cmp_asc;
use crate::Scalar;

/// Smallest sample accepted by [`estimate_local_fdr`].
pub const MIN_OBSERVATIONS: usize = 100;

/// Bandwidth selection for the kernel density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `1.06 min(sd, IQR / 1.349) N^(-1/5)` everywhere.
    NormalReference,
    /// Normal-reference floor widened to the k-th nearest-neighbour distance.
    #[default]
    NearestNeighbour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub bins: usize,
    pub padding: f64,
    pub bandwidth: BandwidthRule,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            bins: 512,
            padding: 1.0,
            bandwidth: BandwidthRule::default(),
        }
    }
}

/// Estimated local and tail fdr on a grid.
///
/// `tail_fdr` uses the right tail at grid points at or above the null
/// location and the left tail below it. `raw_ratio` keeps the unclamped
/// `p0 f0 / f` values for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrCurve<T> {
    pub grid: Vec<T>,
    pub local_fdr: Vec<T>,
    pub tail_fdr: Vec<T>,
    pub raw_ratio: Vec<T>,
    pub density: Vec<T>,
    pub bandwidth: Vec<T>,
    pub p0: T,
    pub null: NormalSpec<T>,
}

impl<T: Scalar> FdrCurve<T> {
    /// Linear interpolation of the local fdr at `z` (constant outside the grid).
    pub fn local_fdr_at(&self, z: T) -> T {
        interpolate(&self.grid, &self.local_fdr, z)
    }
}

fn interpolate<T: Scalar>(xs: &[T], ys: &[T], x: T) -> T {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let j = xs.partition_point(|&g| g <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    ys[j - 1] + t * (ys[j] - ys[j - 1])
}

/// Empirical quantile with linear interpolation between order statistics.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], prob: T) -> T {
    let n = sorted.len();
    let h = prob * T::count(n - 1);
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::count(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn normal_reference_bandwidth<T: Scalar>(sorted: &[T]) -> T {
    let n = T::count(sorted.len());
    let mean = sorted.iter().copied().sum::<T>() / n;
    let var = sorted.iter().map(|&z| (z - mean) * (z - mean)).sum::<T>() / (n - T::one());
    let iqr = quantile_sorted(sorted, T::lit(0.75)) - quantile_sorted(sorted, T::lit(0.25));
    let spread = if iqr > T::zero() {
        var.sqrt().min(iqr / T::lit(1.349))
    } else {
        var.sqrt()
    };
    T::lit(1.06) * spread * n.powf(T::lit(-0.2))
}

/// Distance from `x` to its `k`-th nearest observation in `sorted`.
fn kth_neighbour_distance<T: Scalar>(sorted: &[T], x: T, k: usize) -> T {
    let mut right = sorted.partition_point(|&z| z < x);
    let mut left = right; // candidates are sorted[left - 1] and sorted[right]
    let mut dist = T::zero();
    for _ in 0..k {
        let dl = (left > 0).then(|| x - sorted[left - 1]);
        let dr = (right < sorted.len()).then(|| sorted[right] - x);
        dist = match (dl, dr) {
            (Some(a), Some(b)) if a <= b => {
                left -= 1;
                a
            }
            (_, Some(b)) => {
                right += 1;
                b
            }
            (Some(a), None) => {
                left -= 1;
                a
            }
            (None, None) => break,
        };
    }
    dist
}

/// Estimates the local fdr curve with the default options.
pub fn estimate_local_fdr<T: Scalar>(
    z_values: &[T],
    p0_hat: T,
    null: &NormalSpec<T>,
) -> Result<FdrCurve<T>> {
    estimate_local_fdr_with(z_values, p0_hat, null, &DensityOptions::default())
}

pub fn estimate_local_fdr_with<T: Scalar>(
    z_values: &[T],
    p0_hat: T,
    null: &NormalSpec<T>,
    options: &DensityOptions,
) -> Result<FdrCurve<T>> {
    let n = z_values.len();
    if n < MIN_OBSERVATIONS {
        return Err(Error::invalid(format!(
            "density estimation needs at least {MIN_OBSERVATIONS} z-values, got {n}"
        )));
    }
    if z_values.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("z-values must be finite"));
    }
    if !(p0_hat >= T::zero() && p0_hat <= T::one()) {
        return Err(Error::invalid(format!(
            "p0 estimate {p0_hat} outside [0, 1]"
        )));
    }
    if options.bins < 2 {
        return Err(Error::invalid("need at least two bins"));
    }
    let mut sorted = z_values.to_vec();
    sorted.sort_by(cmp_asc);

    let pad = T::lit(options.padding);
    let lo = sorted[0] - pad;
    let hi = sorted[n - 1] + pad;
    let bins = options.bins;
    let width = (hi - lo) / T::count(bins);
    let grid: Vec<T> = (0..bins)
        .map(|b| lo + (T::count(b) + T::lit(0.5)) * width)
        .collect();
    let mut counts = vec![0usize; bins];
    for &z in &sorted {
        let b = ((z - lo) / width)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(bins - 1);
        counts[b] += 1;
    }

    let h_ref = normal_reference_bandwidth(&sorted);
    let k = ((n as f64).powf(0.6).floor() as usize).clamp(1, n);
    let bandwidth: Vec<T> = grid
        .iter()
        .map(|&x| match options.bandwidth {
            BandwidthRule::NormalReference => h_ref,
            BandwidthRule::NearestNeighbour => h_ref.max(kth_neighbour_distance(&sorted, x, k)),
        })
        .collect();

    let n_t = T::count(n);
    let occupied: Vec<(T, T)> = counts
        .iter()
        .zip(&grid)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &x)| (x, T::count(c)))
        .collect();
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    let half = T::lit(0.5);

    let mut density = Vec::with_capacity(bins);
    let mut raw_ratio = Vec::with_capacity(bins);
    let mut local_fdr = Vec::with_capacity(bins);
    for (&x, &h) in grid.iter().zip(&bandwidth) {
        let mut f = T::zero();
        for &(c, cnt) in &occupied {
            let u = (x - c) / h;
            f += cnt * (-half * u * u).exp();
        }
        f = f * inv_sqrt_2pi / (h * n_t);
        let smoothed_scale = (null.scale * null.scale + h * h).sqrt();
        let f0 = NormalSpec {
            location: null.location,
            scale: smoothed_scale,
        }
        .pdf(x);
        let ratio = if f > T::zero() {
            p0_hat * f0 / f
        } else {
            T::infinity()
        };
        density.push(f);
        raw_ratio.push(ratio);
        local_fdr.push(ratio.max(T::zero()).min(T::one()));
    }

    let tail_fdr = grid
        .iter()
        .map(|&x| {
            let (null_mass, count) = if x >= null.location {
                (null.sf(x), n - sorted.partition_point(|&z| z < x))
            } else {
                (null.cdf(x), sorted.partition_point(|&z| z <= x))
            };
            if count == 0 {
                T::one()
            } else {
                (p0_hat * null_mass * n_t / T::count(count)).min(T::one())
            }
        })
        .collect();

    Ok(FdrCurve {
        grid,
        local_fdr,
        tail_fdr,
        raw_ratio,
        density,
        bandwidth,
        p0: p0_hat,
        null: *null,
    })
}
