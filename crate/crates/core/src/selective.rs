//! Inference after selection: FCR-adjusted intervals for the parameters
//! selected by BH, and hard thresholding of estimates at the BH cut-off.
//!
//! Standard errors are treated as known, so intervals are normal
//! (z) intervals.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{std_normal_quantile, two_sided_p};
use crate::error::{Error, Result};
use crate::procedures::{bh_step_up, Level, PValueSet, RejectionResult};
use crate::rng::{stream, StreamRole};
use crate::Scalar;

/// Point estimates with their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet<T> {
    ids: Vec<String>,
    estimates: Vec<T>,
    std_errors: Vec<T>,
    truth: Option<Vec<T>>,
}

impl<T: Scalar> EstimateSet<T> {
    pub fn new(estimates: Vec<T>, std_errors: Vec<T>) -> Result<Self> {
        let ids = (1..=estimates.len()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, estimates, std_errors)
    }

    pub fn with_ids(ids: Vec<String>, estimates: Vec<T>, std_errors: Vec<T>) -> Result<Self> {
        if ids.len() != estimates.len() || std_errors.len() != estimates.len() {
            return Err(Error::invalid(format!(
                "lengths differ: {} ids, {} estimates, {} standard errors",
                ids.len(),
                estimates.len(),
                std_errors.len()
            )));
        }
        if let Some(i) = estimates.iter().position(|e| !e.is_finite()) {
            return Err(Error::invalid(format!(
                "estimate {} ({}) is not finite",
                i + 1,
                ids[i]
            )));
        }
        if let Some(i) = std_errors
            .iter()
            .position(|s| !(s.is_finite() && *s > T::zero()))
        {
            return Err(Error::invalid(format!(
                "standard error {} ({}) = {} is not strictly positive",
                i + 1,
                ids[i],
                std_errors[i]
            )));
        }
        Ok(Self {
            ids,
            estimates,
            std_errors,
            truth: None,
        })
    }

    /// Attaches the true parameter values (simulation only).
    pub fn with_truth(mut self, truth: Vec<T>) -> Result<Self> {
        if truth.len() != self.estimates.len() {
            return Err(Error::invalid("one true value per estimate required"));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn estimates(&self) -> &[T] {
        &self.estimates
    }

    pub fn std_errors(&self) -> &[T] {
        &self.std_errors
    }

    pub fn truth(&self) -> Option<&[T]> {
        self.truth.as_deref()
    }

    /// Two-sided p-values `2(1 − Φ(|est / se|))`.
    pub fn p_values(&self) -> PValueSet<T> {
        let p = self
            .estimates
            .iter()
            .zip(&self.std_errors)
            .map(|(&e, &s)| two_sided_p(e / s))
            .collect();
        PValueSet::with_ids(p, self.ids.clone()).expect("two-sided p-values lie in [0, 1]")
    }
}

/// Intervals for the selected parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet<T> {
    /// Selected indices, ascending.
    pub selected: Vec<usize>,
    pub ids: Vec<String>,
    pub estimates: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// `1 − R q / n`.
    pub marginal_level: T,
    /// Normal quantile at `1 − R q / (2n)`; zero when nothing is selected.
    pub z_star: T,
}

impl<T: Scalar> IntervalSet<T> {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Whether the `k`-th interval covers `value`.
    pub fn covers(&self, k: usize, value: T) -> bool {
        self.lower[k] <= value && value <= self.upper[k]
    }
}

/// Selects with BH on the two-sided p-values and builds symmetric intervals
/// `est ± z* se` at marginal level `1 − R q / n` for the selected.
pub fn fcr_intervals<T: Scalar>(est: &EstimateSet<T>, q: Level<T>) -> IntervalSet<T> {
    let rejection = bh_step_up(&est.p_values(), q);
    intervals_for(est, &rejection, q)
}

fn intervals_for<T: Scalar>(
    est: &EstimateSet<T>,
    rejection: &RejectionResult<T>,
    q: Level<T>,
) -> IntervalSet<T> {
    let n = est.len();
    let r = rejection.r;
    let (marginal_level, z_star) = if r == 0 {
        (T::one(), T::zero())
    } else {
        let alpha = T::count(r) * q.get() / T::count(n);
        (
            T::one() - alpha,
            std_normal_quantile(T::one() - alpha / T::lit(2.0)),
        )
    };
    let selected = rejection.rejected.clone();
    let estimates: Vec<T> = selected.iter().map(|&i| est.estimates[i]).collect();
    let half: Vec<T> = selected
        .iter()
        .map(|&i| z_star * est.std_errors[i])
        .collect();
    IntervalSet {
        ids: selected.iter().map(|&i| est.ids[i].clone()).collect(),
        lower: estimates.iter().zip(&half).map(|(&e, &h)| e - h).collect(),
        upper: estimates.iter().zip(&half).map(|(&e, &h)| e + h).collect(),
        selected,
        estimates,
        marginal_level,
        z_star,
    }
}

/// Keeps the estimates BH rejects and sets every other one to exactly 0.
pub fn fdr_threshold_estimate<T: Scalar>(est: &EstimateSet<T>, q: Level<T>) -> Vec<T> {
    let rejection = bh_step_up(&est.p_values(), q);
    let mut out = vec![T::zero(); est.len()];
    for &i in &rejection.rejected {
        out[i] = est.estimates[i];
    }
    out
}

/// Hard thresholding at the universal level `√(2 ln n)` standard errors.
pub fn universal_threshold_estimate<T: Scalar>(est: &EstimateSet<T>) -> Vec<T> {
    let t = (T::lit(2.0) * T::count(est.len().max(1)).ln()).sqrt();
    est.estimates
        .iter()
        .zip(&est.std_errors)
        .map(|(&e, &s)| if (e / s).abs() > t { e } else { T::zero() })
        .collect()
}

/// Sparse normal-means simulation: `n` means, the first `n_signals` equal
/// to `signal` and the rest 0, observed with unit noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseMeansSpec {
    pub n: usize,
    pub n_signals: usize,
    pub signal: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl SparseMeansSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if self.n_signals > self.n {
            return Err(Error::invalid(format!(
                "{} signals exceed n = {}",
                self.n_signals, self.n
            )));
        }
        if !self.signal.is_finite() {
            return Err(Error::invalid("signal must be finite"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("at least one replicate required"));
        }
        Ok(())
    }

    pub fn truth(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| if i < self.n_signals { self.signal } else { 0.0 })
            .collect()
    }

    /// Draws replicate `index`.
    pub fn draw(&self, index: usize) -> EstimateSet<f64> {
        let truth = self.truth();
        let mut rng = stream(self.seed, index as u64, StreamRole::Noise);
        let est = truth
            .iter()
            .map(|&t| t + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>();
        EstimateSet::new(est, vec![1.0; self.n])
            .and_then(|e| e.with_truth(truth))
            .expect("simulated estimates are valid")
    }
}

/// Mean and Monte Carlo standard error of a per-replicate quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// `None` with a single replicate.
    pub se: Option<f64>,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Self { mean, se }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcrReport {
    /// Mean false-coverage proportion among selected (0 when nothing is
    /// selected).
    pub fcr: McEstimate,
    pub mean_selected: f64,
    pub replicates: usize,
}

/// Realized false coverage rate of [`fcr_intervals`] over replicates.
pub fn fcr_study(spec: &SparseMeansSpec, q: Level<f64>) -> Result<FcrReport> {
    spec.validate()?;
    let per_rep: Vec<(f64, usize)> = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| {
            let est = spec.draw(rep);
            let truth = est.truth().expect("drawn with truth");
            let iv = fcr_intervals(&est, q);
            let misses = iv
                .selected
                .iter()
                .enumerate()
                .filter(|&(k, &i)| !iv.covers(k, truth[i]))
                .count();
            let fcp = if iv.is_empty() {
                0.0
            } else {
                misses as f64 / iv.len() as f64
            };
            (fcp, iv.len())
        })
        .collect();
    let fcps: Vec<f64> = per_rep.iter().map(|x| x.0).collect();
    let selected: usize = per_rep.iter().map(|x| x.1).sum();
    Ok(FcrReport {
        fcr: McEstimate::from_values(&fcps),
        mean_selected: selected as f64 / spec.replicates as f64,
        replicates: spec.replicates,
    })
}

/// Per-coordinate mean squared error of three estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub fdr_threshold: McEstimate,
    pub universal_threshold: McEstimate,
    pub zero: McEstimate,
    /// `fdr_threshold − universal_threshold`, paired by replicate.
    pub difference: McEstimate,
    pub replicates: usize,
}

fn mse(estimate: &[f64], truth: &[f64]) -> f64 {
    estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).powi(2))
        .sum::<f64>()
        / truth.len() as f64
}

/// Compares BH hard thresholding with the universal threshold and the zero
/// estimator. Measures risk only; no ordering is asserted.
pub fn threshold_risk_study(spec: &SparseMeansSpec, q: Level<f64>) -> Result<RiskReport> {
    spec.validate()?;
    let per_rep: Vec<[f64; 3]> = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| {
            let est = spec.draw(rep);
            let truth = est.truth().expect("drawn with truth");
            [
                mse(&fdr_threshold_estimate(&est, q), truth),
                mse(&universal_threshold_estimate(&est), truth),
                mse(&vec![0.0; truth.len()], truth),
            ]
        })
        .collect();
    let column = |k: usize| per_rep.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let diff: Vec<f64> = per_rep.iter().map(|r| r[0] - r[1]).collect();
    Ok(RiskReport {
        fdr_threshold: McEstimate::from_values(&column(0)),
        universal_threshold: McEstimate::from_values(&column(1)),
        zero: McEstimate::from_values(&column(2)),
        difference: McEstimate::from_values(&diff),
        replicates: spec.replicates,
    })
}
