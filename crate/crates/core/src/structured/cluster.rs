use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::combine::{combine_pvalues, CombineMethod};
use crate::error::{Error, Result};
use crate::procedures::{bh_step_up, weighted_bh, Level, PValueSet, RejectionResult};
use crate::Scalar;

/// Assignment of every hypothesis to exactly one cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Cluster labels in order of first appearance.
    labels: Vec<String>,
    members: Vec<Vec<usize>>,
    assignments: Vec<usize>,
}

impl ClusterPartition {
    /// Builds a partition from one label per hypothesis.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut out_labels = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut assignments = Vec::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            let label = label.as_ref();
            let c = *index.entry(label).or_insert_with(|| {
                out_labels.push(label.to_string());
                members.push(Vec::new());
                out_labels.len() - 1
            });
            members[c].push(i);
            assignments.push(c);
        }
        Self {
            labels: out_labels,
            members,
            assignments,
        }
    }

    /// Builds a partition from explicit member lists over `n` hypotheses.
    pub fn from_members(labels: Vec<String>, members: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if labels.len() != members.len() {
            return Err(Error::invalid("one label per cluster required"));
        }
        let mut assignments = vec![usize::MAX; n];
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::invalid(format!("cluster {:?} is empty", labels[c])));
            }
            for &i in m {
                if i >= n {
                    return Err(Error::invalid(format!(
                        "cluster {:?} references hypothesis {i} of {n}",
                        labels[c]
                    )));
                }
                if assignments[i] != usize::MAX {
                    return Err(Error::invalid(format!(
                        "hypothesis {i} belongs to two clusters"
                    )));
                }
                assignments[i] = c;
            }
        }
        if let Some(i) = assignments.iter().position(|&a| a == usize::MAX) {
            return Err(Error::invalid(format!(
                "hypothesis {i} is not in any cluster"
            )));
        }
        Ok(Self {
            labels,
            members,
            assignments,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn n_hypotheses(&self) -> usize {
        self.assignments.len()
    }
}

/// Cluster-level p-values and the rejection over clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTestResult<T> {
    /// One entry per cluster, labelled by cluster; weights are the cluster
    /// sizes when size weighting is on.
    pub cluster_p: PValueSet<T>,
    pub rejection: RejectionResult<T>,
}

impl<T: Scalar> ClusterTestResult<T> {
    pub fn rejected_labels(&self) -> Vec<&str> {
        self.rejection
            .rejected
            .iter()
            .map(|&c| self.cluster_p.ids()[c].as_str())
            .collect()
    }
}

/// Combines p-values within each cluster and tests the clusters, with BH or
/// with size-proportional weighted BH.
pub fn cluster_test<T: Scalar>(
    p: &PValueSet<T>,
    partition: &ClusterPartition,
    method: CombineMethod,
    q: Level<T>,
    size_weighting: bool,
) -> Result<ClusterTestResult<T>> {
    if partition.n_hypotheses() != p.len() {
        return Err(Error::invalid(format!(
            "partition covers {} hypotheses, p-value set has {}",
            partition.n_hypotheses(),
            p.len()
        )));
    }
    let mut values = Vec::with_capacity(partition.members.len());
    for (label, m) in partition.labels.iter().zip(&partition.members) {
        if m.is_empty() {
            return Err(Error::invalid(format!("cluster {label:?} is empty")));
        }
        let member_p: Vec<T> = m.iter().map(|&i| p.values()[i]).collect();
        values.push(combine_pvalues(&member_p, method)?.p_value);
    }
    let cluster_p = PValueSet::with_ids(values, partition.labels.clone())?;
    if size_weighting {
        let sizes = partition.sizes().into_iter().map(T::count).collect();
        let cluster_p = cluster_p.with_weights(sizes)?;
        let rejection = weighted_bh(&cluster_p, q)?;
        Ok(ClusterTestResult {
            cluster_p,
            rejection,
        })
    } else {
        let rejection = bh_step_up(&cluster_p, q);
        Ok(ClusterTestResult {
            cluster_p,
            rejection,
        })
    }
}
