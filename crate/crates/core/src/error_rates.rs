//! Per-replicate error accounting and Monte Carlo error-rate estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::RejectionResult;
use crate::Scalar;

/// False rejections `v` and total rejections `r` of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub v: usize,
    pub r: usize,
}

impl ReplicateOutcome {
    pub fn new(v: usize, r: usize) -> Result<Self> {
        if v > r {
            return Err(Error::invalid(format!("v = {v} exceeds r = {r}")));
        }
        Ok(Self { v, r })
    }
}

/// Counts false and total rejections. `truth_mask[i]` is true when the null
/// hypothesis `i` is true.
pub fn account<T>(truth_mask: &[bool], rejection: &RejectionResult<T>) -> Result<ReplicateOutcome> {
    if truth_mask.len() != rejection.order.len() {
        return Err(Error::invalid(format!(
            "truth mask has {} entries for {} hypotheses",
            truth_mask.len(),
            rejection.order.len()
        )));
    }
    let v = rejection
        .rejected
        .iter()
        .filter(|&&i| truth_mask[i])
        .count();
    Ok(ReplicateOutcome { v, r: rejection.r })
}

/// False discovery proportion `v / r`, with `0/0` read as 0.
pub fn fdp<T: Scalar>(outcome: ReplicateOutcome) -> T {
    if outcome.r == 0 {
        T::zero()
    } else {
        T::count(outcome.v) / T::count(outcome.r)
    }
}

/// Aggregated Monte Carlo estimates over a set of replicates.
///
/// `pfdr_hat` is absent when no replicate rejected anything, and
/// `fdr_cap_hat` (the ratio of expectations `E V / E R`) is absent when the
/// total rejection count is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateReport<T> {
    pub fdr_hat: T,
    pub pfdr_hat: Option<T>,
    pub fdr_cap_hat: Option<T>,
    pub fwer_hat: T,
    pub n_replicates: usize,
    pub n_replicates_with_rejection: usize,
    /// Sample standard deviation of the fdp divided by `√n_replicates`;
    /// absent with a single replicate.
    pub mc_se_fdr: Option<T>,
    /// Replicate-level sample variance of the fdp.
    pub fdp_variance: Option<T>,
    pub total_v: u64,
    pub total_r: u64,
}

impl<T: Scalar> ErrorRateReport<T> {
    pub fn mean_rejections(&self) -> T {
        T::lit(self.total_r as f64) / T::count(self.n_replicates)
    }

    pub fn csv_header() -> &'static [&'static str] {
        &[
            "fdr_hat",
            "pfdr_hat",
            "fdr_cap_hat",
            "fwer_hat",
            "n_replicates",
            "n_replicates_with_rejection",
            "mc_se_fdr",
            "fdp_variance",
            "total_v",
            "total_r",
        ]
    }

    /// Flat CSV record; undefined fields are written as `null`.
    pub fn csv_record(&self) -> Vec<String> {
        fn opt<T: Scalar>(x: Option<T>) -> String {
            x.map_or_else(|| "null".to_string(), |v| v.to_string())
        }
        vec![
            self.fdr_hat.to_string(),
            opt(self.pfdr_hat),
            opt(self.fdr_cap_hat),
            self.fwer_hat.to_string(),
            self.n_replicates.to_string(),
            self.n_replicates_with_rejection.to_string(),
            opt(self.mc_se_fdr),
            opt(self.fdp_variance),
            self.total_v.to_string(),
            self.total_r.to_string(),
        ]
    }

    /// Parses a record written by [`csv_record`](Self::csv_record).
    pub fn from_csv_record(fields: &[&str]) -> Result<Self> {
        if fields.len() != Self::csv_header().len() {
            return Err(Error::invalid(format!(
                "expected {} fields, found {}",
                Self::csv_header().len(),
                fields.len()
            )));
        }
        fn num<T: Scalar>(s: &str) -> Result<T> {
            s.parse::<f64>()
                .map(T::lit)
                .map_err(|e| Error::invalid(format!("{s:?}: {e}")))
        }
        fn opt<T: Scalar>(s: &str) -> Result<Option<T>> {
            if s == "null" {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        fn int<I: std::str::FromStr>(s: &str) -> Result<I> {
            s.parse()
                .map_err(|_| Error::invalid(format!("{s:?} is not a count")))
        }
        Ok(Self {
            fdr_hat: num(fields[0])?,
            pfdr_hat: opt(fields[1])?,
            fdr_cap_hat: opt(fields[2])?,
            fwer_hat: num(fields[3])?,
            n_replicates: int(fields[4])?,
            n_replicates_with_rejection: int(fields[5])?,
            mc_se_fdr: opt(fields[6])?,
            fdp_variance: opt(fields[7])?,
            total_v: int(fields[8])?,
            total_r: int(fields[9])?,
        })
    }
}

/// Aggregates replicate outcomes. Floating-point sums run over the sorted
/// fdp values, so the result is bit-identical under any reordering of the
/// replicates.
pub fn aggregate<T: Scalar>(outcomes: &[ReplicateOutcome]) -> Result<ErrorRateReport<T>> {
    if outcomes.is_empty() {
        return Err(Error::invalid("cannot aggregate zero replicates"));
    }
    let n = outcomes.len();
    let n_t = T::count(n);
    let mut fdps: Vec<T> = outcomes.iter().map(|&o| fdp(o)).collect();
    fdps.sort_by(crate::scalar::cmp_asc);
    let fdr_hat = fdps.iter().copied().sum::<T>() / n_t;

    let mut with_rejection: Vec<T> = outcomes
        .iter()
        .filter(|o| o.r > 0)
        .map(|&o| fdp(o))
        .collect();
    with_rejection.sort_by(crate::scalar::cmp_asc);
    let pfdr_hat = if with_rejection.is_empty() {
        None
    } else {
        Some(with_rejection.iter().copied().sum::<T>() / T::count(with_rejection.len()))
    };

    let total_v: u64 = outcomes.iter().map(|o| o.v as u64).sum();
    let total_r: u64 = outcomes.iter().map(|o| o.r as u64).sum();
    let fdr_cap_hat = (total_r > 0).then(|| T::lit(total_v as f64) / T::lit(total_r as f64));

    let fwer_hat = T::count(outcomes.iter().filter(|o| o.v > 0).count()) / n_t;

    let fdp_variance = (n > 1).then(|| {
        fdps.iter()
            .map(|&f| (f - fdr_hat) * (f - fdr_hat))
            .sum::<T>()
            / T::count(n - 1)
    });
    let mc_se_fdr = fdp_variance.map(|var| (var / n_t).sqrt());

    Ok(ErrorRateReport {
        fdr_hat,
        pfdr_hat,
        fdr_cap_hat,
        fwer_hat,
        n_replicates: n,
        n_replicates_with_rejection: with_rejection.len(),
        mc_se_fdr,
        fdp_variance,
        total_v,
        total_r,
    })
}

/// Gaps `|FDR − pFDR|` and `|pFDR − Fdr|` between the three estimators.
pub fn identity_chain_gap<T: Scalar>(report: &ErrorRateReport<T>) -> Result<(T, T)> {
    match (report.pfdr_hat, report.fdr_cap_hat) {
        (Some(pfdr), Some(cap)) => Ok(((report.fdr_hat - pfdr).abs(), (pfdr - cap).abs())),
        _ => Err(Error::ChainNotEvaluable(
            "no replicate produced a rejection, so pFDR and E(V)/E(R) are undefined".into(),
        )),
    }
}

/// Bonferroni baseline: rejects `p_i ≤ q / n`. Kept for FWER comparisons.
pub fn bonferroni<T: Scalar>(
    p: &crate::procedures::PValueSet<T>,
    q: crate::procedures::Level<T>,
) -> RejectionResult<T> {
    let n = p.len();
    let crit = q.get() / T::count(n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| crate::scalar::cmp_asc(&p.values()[a], &p.values()[b]).then(a.cmp(&b)));
    let rejected: Vec<usize> = (0..n).filter(|&i| p.values()[i] <= crit).collect();
    RejectionResult {
        r: rejected.len(),
        rejected,
        order,
        tested: p.values().to_vec(),
        thresholds: vec![crit; n],
        adaptive_bounds: None,
        stage_trace: None,
    }
}
