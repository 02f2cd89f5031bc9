//! Flat multiple-testing procedures.
//!
//! All procedures operate on the order statistics of a [`PValueSet`] and
//! return a [`RejectionResult`] that carries the rejected indices together
//! with the critical values that were actually compared.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dist::harmonic;
use crate::error::{Error, Result};
use crate::scalar::{cmp_asc, Scalar};

/// Per-hypothesis p-values with labels and optional weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSet<T> {
    values: Vec<T>,
    ids: Vec<String>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> PValueSet<T> {
    /// Builds a set labelled `1..=n`.
    pub fn new(values: Vec<T>) -> Result<Self> {
        let ids = (1..=values.len()).map(|i| i.to_string()).collect();
        Self::with_ids(values, ids)
    }

    pub fn with_ids(values: Vec<T>, ids: Vec<String>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} ids for {} p-values",
                ids.len(),
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "p-value {} ({}) is not finite",
                    i + 1,
                    ids[i]
                )));
            }
            if v < T::zero() || v > T::one() {
                return Err(Error::invalid(format!(
                    "p-value {} ({}) = {v} outside [0, 1]",
                    i + 1,
                    ids[i]
                )));
            }
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate id {id:?}")));
            }
        }
        Ok(Self {
            values,
            ids,
            weights: None,
        })
    }

    /// Attaches strictly positive weights, one per hypothesis.
    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.values.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} p-values",
                weights.len(),
                self.values.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w <= T::zero())
        {
            return Err(Error::invalid(format!(
                "weight {} ({}) = {w} is not strictly positive",
                i + 1,
                self.ids[i]
            )));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    /// Restricts the set to `indices`, keeping ids and weights aligned.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }
}

/// Target error level `q` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Level<T>(T);

impl<T: Scalar> Level<T> {
    pub fn new(q: T) -> Result<Self> {
        if q.is_finite() && q > T::zero() && q < T::one() {
            Ok(Self(q))
        } else {
            Err(Error::invalid(format!("level {q} outside (0, 1)")))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

impl<T: Scalar> Serialize for Level<T> {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Level<T> {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        Level::new(T::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

/// Audit record of a two-stage adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace<T> {
    pub stage_one_level: T,
    pub stage_one_rejections: usize,
    /// Estimated number of true nulls; absent when stage one short-circuits.
    pub null_count_estimate: Option<T>,
    pub stage_two_level: Option<T>,
}

/// Outcome of a procedure: rejected indices plus the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionResult<T> {
    /// Rejected hypothesis indices (0-based, ascending).
    pub rejected: Vec<usize>,
    pub r: usize,
    /// Hypothesis indices in the order the procedure ranked them.
    pub order: Vec<usize>,
    /// Statistic compared against the critical values, indexed by hypothesis
    /// (the p-value, or `p / w` for weighted runs).
    pub tested: Vec<T>,
    /// Critical value for each visited rank.
    pub thresholds: Vec<T>,
    /// Null-count bounds `n0i` visited by the step-down recursion.
    pub adaptive_bounds: Option<Vec<T>>,
    pub stage_trace: Option<StageTrace<T>>,
}

impl<T: Scalar> RejectionResult<T> {
    fn from_order(tested: Vec<T>, order: Vec<usize>, thresholds: Vec<T>, count: usize) -> Self {
        let mut rejected: Vec<usize> = order[..count].to_vec();
        rejected.sort_unstable();
        Self {
            r: rejected.len(),
            rejected,
            order,
            tested,
            thresholds,
            adaptive_bounds: None,
            stage_trace: None,
        }
    }

    pub fn is_rejected(&self, index: usize) -> bool {
        self.rejected.binary_search(&index).is_ok()
    }

    /// Rank (1-based) of every hypothesis, indexed by hypothesis.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            ranks[i] = pos + 1;
        }
        ranks
    }

    /// Tabular form in input order: id, p, weight, rank, threshold, flag.
    pub fn rows(&self, p: &PValueSet<T>) -> Vec<RejectionRow<T>> {
        let ranks = self.ranks();
        (0..p.len())
            .map(|i| RejectionRow {
                id: p.ids()[i].clone(),
                p: p.values()[i],
                weight: p.weights().map(|w| w[i]),
                rank: ranks[i],
                threshold: self.thresholds.get(ranks[i] - 1).copied(),
                rejected: self.is_rejected(i),
            })
            .collect()
    }
}

/// One row of the serialized rejection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow<T> {
    pub id: String,
    pub p: T,
    pub weight: Option<T>,
    pub rank: usize,
    pub threshold: Option<T>,
    pub rejected: bool,
}

fn sorted_order<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| cmp_asc(&values[a], &values[b]).then(a.cmp(&b)));
    order
}

/// Linear step-up at an arbitrary (possibly > 1) level.
fn step_up<T: Scalar>(tested: Vec<T>, level: T) -> RejectionResult<T> {
    let n = tested.len();
    let order = sorted_order(&tested);
    let n_t = T::count(n);
    let thresholds: Vec<T> = (1..=n).map(|i| level * T::count(i) / n_t).collect();
    let k = (0..n)
        .rev()
        .find(|&pos| tested[order[pos]] <= thresholds[pos])
        .map_or(0, |pos| pos + 1);
    // everything tied with the boundary value shares its fate
    let count = if k == 0 {
        0
    } else {
        let boundary = tested[order[k - 1]];
        k + order[k..]
            .iter()
            .take_while(|&&i| tested[i] <= boundary)
            .count()
    };
    RejectionResult::from_order(tested, order, thresholds, count)
}

/// Benjamini–Hochberg linear step-up: rejects the `k` smallest p-values,
/// `k = max{i : p(i) ≤ q i / n}`.
pub fn bh_step_up<T: Scalar>(p: &PValueSet<T>, q: Level<T>) -> RejectionResult<T> {
    step_up(p.values().to_vec(), q.get())
}

/// Benjamini–Yekutieli step-up: BH at level `q / H_n`.
pub fn by_step_up<T: Scalar>(p: &PValueSet<T>, q: Level<T>) -> RejectionResult<T> {
    let h = T::lit(harmonic(p.len().max(1)));
    step_up(p.values().to_vec(), q.get() / h)
}

/// Null-count bound used at step `i` of the adaptive step-down procedure,
/// `n + 1 − i(1 − q)`.
pub fn step_down_bound<T: Scalar>(n: usize, i: usize, q: T) -> T {
    T::count(n + 1) - T::count(i) * (T::one() - q)
}

/// Adaptive step-down: starting at `i = 1`, continues while
/// `p(i) ≤ q i / n0i` with `n0i = n + 1 − i(1 − q)`.
pub fn adaptive_step_down<T: Scalar>(p: &PValueSet<T>, q: Level<T>) -> RejectionResult<T> {
    let tested = p.values().to_vec();
    let n = tested.len();
    let q = q.get();
    let order = sorted_order(&tested);
    let mut thresholds = Vec::new();
    let mut bounds = Vec::new();
    let mut count = 0;
    for i in 1..=n {
        let bound = step_down_bound(n, i, q);
        let crit = q * T::count(i) / bound;
        bounds.push(bound);
        thresholds.push(crit);
        if tested[order[i - 1]] <= crit {
            count = i;
        } else {
            break;
        }
    }
    let mut result = RejectionResult::from_order(tested, order, thresholds, count);
    result.adaptive_bounds = Some(bounds);
    result
}

/// How the two-stage procedure turns the stage-one count `R1` into an
/// estimate of the number of true nulls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// `n − R1`.
    #[default]
    Canonical,
    /// `n − R1 (1 − q)` with the nominal level `q`.
    DeflatedAtQ,
    /// `n − R1 (1 − q*)` with the stage-one level `q* = q / (1 + q)`.
    DeflatedAtStageLevel,
}

/// Two-stage adaptive linear step-up.
///
/// Stage one runs BH at `q* = q / (1 + q)`. If it rejects nothing or
/// everything the result is returned as is; otherwise the null count is
/// estimated from `R1` and stage two runs BH at `q* n / n0_hat`.
pub fn two_stage_adaptive<T: Scalar>(
    p: &PValueSet<T>,
    q: Level<T>,
    variant: BoundVariant,
) -> RejectionResult<T> {
    let n = p.len();
    let q = q.get();
    let q_star = q / (T::one() + q);
    let stage_one = step_up(p.values().to_vec(), q_star);
    let r1 = stage_one.r;
    let mut trace = StageTrace {
        stage_one_level: q_star,
        stage_one_rejections: r1,
        null_count_estimate: None,
        stage_two_level: None,
    };
    if r1 == 0 || r1 == n {
        let mut result = stage_one;
        result.stage_trace = Some(trace);
        return result;
    }
    let r1_t = T::count(r1);
    let n0_hat = match variant {
        BoundVariant::Canonical => T::count(n) - r1_t,
        BoundVariant::DeflatedAtQ => T::count(n) - r1_t * (T::one() - q),
        BoundVariant::DeflatedAtStageLevel => T::count(n) - r1_t * (T::one() - q_star),
    };
    let level = q_star * T::count(n) / n0_hat;
    trace.null_count_estimate = Some(n0_hat);
    trace.stage_two_level = Some(level);
    let mut result = step_up(p.values().to_vec(), level);
    result.stage_trace = Some(trace);
    result
}

/// Rescales weights to mean one.
pub fn normalize_weights<T: Scalar>(weights: &[T]) -> Vec<T> {
    let total: T = weights.iter().copied().sum();
    let n = T::count(weights.len());
    weights.iter().map(|&w| w * n / total).collect()
}

/// Weighted BH: BH applied to `p_i / w_i` after rescaling the weights to
/// mean one.
pub fn weighted_bh<T: Scalar>(p: &PValueSet<T>, q: Level<T>) -> Result<RejectionResult<T>> {
    let weights = p
        .weights()
        .ok_or_else(|| Error::invalid("weighted BH requires weights"))?;
    let w = normalize_weights(weights);
    let tested = p.values().iter().zip(&w).map(|(&v, &w)| v / w).collect();
    Ok(step_up(tested, q.get()))
}

/// Step-up adjusted p-values `min_{j ≥ i} min(1, c n p(j) / j)`, returned in
/// input order. `c = 1` gives BH, `c = H_n` gives BY.
fn step_up_adjusted<T: Scalar>(values: &[T], factor: T) -> Vec<T> {
    let n = values.len();
    let order = sorted_order(values);
    let n_t = T::count(n);
    let mut adjusted = vec![T::zero(); n];
    let mut running = T::one();
    for pos in (0..n).rev() {
        let i = order[pos];
        let candidate = (factor * n_t * values[i] / T::count(pos + 1)).min(T::one());
        running = running.min(candidate);
        adjusted[i] = running;
    }
    adjusted
}

/// BH adjusted p-values; hypothesis `i` is rejected by BH at `q` iff its
/// adjusted value is ≤ `q`.
pub fn bh_adjusted<T: Scalar>(p: &PValueSet<T>) -> Vec<T> {
    step_up_adjusted(p.values(), T::one())
}

/// BY adjusted p-values.
pub fn by_adjusted<T: Scalar>(p: &PValueSet<T>) -> Vec<T> {
    step_up_adjusted(p.values(), T::lit(harmonic(p.len().max(1))))
}
