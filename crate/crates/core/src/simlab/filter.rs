//! Filter-then-test: selecting hypotheses by a data-driven filter before
//! testing distorts the null distribution of the retained p-values.
//!
//! Each hypothesis has two groups of `m` samples on a positive scale,
//! `exp(b_i + e)` with baseline `b_i ~ N(0, baseline_sd²)` and unit log-scale
//! noise; alternatives shift the second group by `effect √(2/m)` on the log
//! scale. The test is the two-sample z-test on log values with the known
//! unit variance, so unfiltered null p-values are exactly uniform. The
//! filter statistic is computed on the original scale over both groups.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};
use crate::procedures::PValueSet;
use crate::rng::{stream, StreamRole};
use crate::two_groups::{diagnose_null, NormalSpec, NullDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStatistic {
    /// Sample standard deviation of the pooled samples.
    SampleSd,
    /// Ratio of the largest to the smallest pooled sample.
    FoldChange,
}

/// Cut-off for the filter statistic; hypotheses strictly above it pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterThreshold {
    Absolute(f64),
    /// Empirical quantile of the statistic within the replicate.
    Quantile(f64),
}

fn default_baseline_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub statistic: FilterStatistic,
    pub threshold: FilterThreshold,
    pub samples_per_group: usize,
    /// Spread of the per-hypothesis log-scale baselines.
    #[serde(default = "default_baseline_sd")]
    pub baseline_sd: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_group < 2 {
            return Err(Error::invalid(
                "filter needs at least two samples per group",
            ));
        }
        match self.threshold {
            FilterThreshold::Absolute(t) if !(t >= 0.0 && t.is_finite()) => Err(Error::invalid(
                format!("filter threshold {t} must be finite and non-negative"),
            )),
            FilterThreshold::Quantile(u) if !(0.0..1.0).contains(&u) => Err(Error::invalid(
                format!("filter quantile {u} outside [0, 1)"),
            )),
            _ if !(self.baseline_sd >= 0.0 && self.baseline_sd.is_finite()) => Err(Error::invalid(
                "baseline_sd must be finite and non-negative",
            )),
            _ => Ok(()),
        }
    }
}

/// One filter-then-test replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub pre: PValueSet<f64>,
    pub post: PValueSet<f64>,
    /// Indices of the hypotheses passing the filter, ascending.
    pub kept: Vec<usize>,
    /// Filter cut-off actually applied.
    pub cutoff: f64,
    pub pre_diagnostics: NullDiagnostics<f64>,
    pub post_diagnostics: NullDiagnostics<f64>,
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn fold_change(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Runs replicate `index`: tests every hypothesis, filters, and diagnoses
/// both p-value sets against the standard normal null.
pub fn filter_then_test(
    scenario: &Scenario,
    filter: &FilterSpec,
    index: usize,
) -> Result<FilterOutcome> {
    scenario.validate()?;
    filter.validate()?;
    let m = filter.samples_per_group;
    let delta = scenario.effect * (2.0 / m as f64).sqrt();
    let scale = (2.0 / m as f64).sqrt();
    let truth = scenario.truth_mask();
    let mut rng = stream(scenario.seed, index as u64, StreamRole::Samples);

    let mut z = Vec::with_capacity(scenario.n);
    let mut stat = Vec::with_capacity(scenario.n);
    let mut pooled = vec![0.0; 2 * m];
    for &null in &truth {
        let base: f64 = filter.baseline_sd * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let shift = if null { 0.0 } else { delta };
        let (mut sum_a, mut sum_b) = (0.0_f64, 0.0_f64);
        for (j, slot) in pooled.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            let log_value = if j < m {
                sum_a += e;
                base + e
            } else {
                sum_b += e + shift;
                base + e + shift
            };
            *slot = log_value.exp();
        }
        z.push((sum_b - sum_a) / m as f64 / scale);
        stat.push(match filter.statistic {
            FilterStatistic::SampleSd => sample_sd(&pooled),
            FilterStatistic::FoldChange => fold_change(&pooled),
        });
    }

    let cutoff = match filter.threshold {
        FilterThreshold::Absolute(t) => t,
        FilterThreshold::Quantile(u) => {
            let mut sorted = stat.clone();
            sorted.sort_by(f64::total_cmp);
            crate::two_groups::density::quantile_sorted(&sorted, u)
        }
    };
    let kept: Vec<usize> = (0..scenario.n).filter(|&i| stat[i] > cutoff).collect();
    if kept.is_empty() {
        return Err(Error::EmptyPostFilter);
    }
    let to_p = |zs: &[f64]| {
        zs.iter()
            .map(|&zi| scenario.sidedness.p_value(zi))
            .collect::<Vec<f64>>()
    };
    let pre = PValueSet::new(to_p(&z))?;
    let post = pre.subset(&kept);
    let kept_z: Vec<f64> = kept.iter().map(|&i| z[i]).collect();
    let null = NormalSpec::standard();
    Ok(FilterOutcome {
        pre_diagnostics: diagnose_null(&z, &null)?,
        post_diagnostics: diagnose_null(&kept_z, &null)?,
        pre,
        post,
        kept,
        cutoff,
    })
}

/// Summary of repeated filter-then-test replicates. A KS failure means the
/// statistic exceeds the 5% critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStudyReport {
    pub scenario_hash: String,
    pub seed: u64,
    pub runs: usize,
    pub pre_ks_failures: usize,
    pub post_ks_failures: usize,
    /// Runs where the post-filter set fails and the pre-filter set passes.
    pub distorted_runs: usize,
    pub distorted_fraction: f64,
    pub mean_kept: f64,
    pub mean_pre_dip: f64,
    pub mean_post_dip: f64,
    pub mean_post_ks: f64,
}

/// Repeats [`filter_then_test`] over the scenario's replicates.
pub fn filter_study(scenario: &Scenario, filter: &FilterSpec) -> Result<FilterStudyReport> {
    scenario.validate()?;
    filter.validate()?;
    let rows = (0..scenario.replicates)
        .into_par_iter()
        .map(|rep| {
            filter_then_test(scenario, filter, rep)
                .map(|o| {
                    let fails = |d: &NullDiagnostics<f64>| d.ks_statistic > d.ks_critical_5pct;
                    (
                        fails(&o.pre_diagnostics),
                        fails(&o.post_diagnostics),
                        o.kept.len(),
                        o.pre_diagnostics.dip_statistic,
                        o.post_diagnostics.dip_statistic,
                        o.post_diagnostics.ks_statistic,
                    )
                })
                .map_err(|e| Error::Replicate {
                    index: rep,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = rows.len();
    let nf = runs as f64;
    let distorted_runs = rows.iter().filter(|r| !r.0 && r.1).count();
    Ok(FilterStudyReport {
        scenario_hash: super::hash_json(&(scenario, filter)),
        seed: scenario.seed,
        runs,
        pre_ks_failures: rows.iter().filter(|r| r.0).count(),
        post_ks_failures: rows.iter().filter(|r| r.1).count(),
        distorted_runs,
        distorted_fraction: distorted_runs as f64 / nf,
        mean_kept: rows.iter().map(|r| r.2 as f64).sum::<f64>() / nf,
        mean_pre_dip: rows.iter().map(|r| r.3).sum::<f64>() / nf,
        mean_post_dip: rows.iter().map(|r| r.4).sum::<f64>() / nf,
        mean_post_ks: rows.iter().map(|r| r.5).sum::<f64>() / nf,
    })
}
