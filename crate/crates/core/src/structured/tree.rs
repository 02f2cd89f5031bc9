use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::combine::{combine_pvalues, CombineMethod};
use crate::error::{Error, Result};
use crate::procedures::{bh_step_up, Level, PValueSet, RejectionResult};
use crate::Scalar;

/// One node of a hypothesis tree as supplied by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<T> {
    pub id: String,
    /// `None` marks a root.
    pub parent: Option<String>,
    /// Hypothesis indices covered by the node. May be left empty for an
    /// internal node, in which case the union of its children is used.
    pub members: Vec<usize>,
    /// Externally supplied node p-value; bypasses combining.
    pub p_value: Option<T>,
}

impl<T> TreeNode<T> {
    pub fn new(id: impl Into<String>, parent: Option<&str>, members: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            parent: parent.map(str::to_string),
            members,
            p_value: None,
        }
    }

    pub fn with_p_value(mut self, p: T) -> Self {
        self.p_value = Some(p);
        self
    }
}

/// Validated forest of hypothesis families.
///
/// Roots are never tested themselves: the children of each root form a
/// top-level family, and the children of a node form a family that is
/// tested only once that node has been rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTree<T> {
    nodes: Vec<TreeNode<T>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    depth: Vec<usize>,
    n_hypotheses: usize,
}

fn tree_error(node: &str, reason: impl Into<String>) -> Error {
    Error::Tree {
        node: node.to_string(),
        reason: reason.into(),
    }
}

impl<T: Scalar> HypothesisTree<T> {
    /// Validates the node list against `n_hypotheses` hypotheses. Errors
    /// name the offending node.
    pub fn new(mut nodes: Vec<TreeNode<T>>, n_hypotheses: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("tree has no nodes"));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.id.is_empty() {
                return Err(tree_error(&node.id, "empty node id"));
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(tree_error(&node.id, "duplicate node id"));
            }
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut roots = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            match &node.parent {
                None => roots.push(i),
                Some(parent) => {
                    let &pi = index.get(parent).ok_or_else(|| {
                        tree_error(&node.id, format!("parent {parent:?} does not exist"))
                    })?;
                    children[pi].push(i);
                }
            }
        }

        let mut depth = vec![usize::MAX; nodes.len()];
        let mut bfs = Vec::with_capacity(nodes.len());
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        for &r in &roots {
            depth[r] = 0;
        }
        while let Some(i) = queue.pop_front() {
            bfs.push(i);
            for &c in &children[i] {
                depth[c] = depth[i] + 1;
                queue.push_back(c);
            }
        }
        if let Some(i) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(tree_error(
                &nodes[i].id,
                "node is on a cycle and not reachable from any root",
            ));
        }

        for node in &nodes {
            if let Some(&m) = node.members.iter().find(|&&m| m >= n_hypotheses) {
                return Err(tree_error(
                    &node.id,
                    format!("member index {m} out of range for {n_hypotheses} hypotheses"),
                ));
            }
            if let Some(p) = node.p_value {
                if !(p >= T::zero() && p <= T::one()) {
                    return Err(tree_error(
                        &node.id,
                        format!("node p-value {p} outside [0, 1]"),
                    ));
                }
            }
        }

        // fill empty internal member lists bottom-up, then check nesting
        for &i in bfs.iter().rev() {
            if nodes[i].members.is_empty() && !children[i].is_empty() {
                let mut members: Vec<usize> = children[i]
                    .iter()
                    .flat_map(|&c| nodes[c].members.iter().copied())
                    .collect();
                members.sort_unstable();
                members.dedup();
                nodes[i].members = members;
            }
            if nodes[i].members.is_empty() && depth[i] > 0 {
                return Err(tree_error(&nodes[i].id, "node has no member hypotheses"));
            }
        }
        for node in &mut nodes {
            node.members.sort_unstable();
            node.members.dedup();
        }
        for (i, node) in nodes.iter().enumerate() {
            for &c in &children[i] {
                let child = &nodes[c];
                if let Some(&m) = child
                    .members
                    .iter()
                    .find(|m| node.members.binary_search(m).is_err())
                {
                    return Err(tree_error(
                        &child.id,
                        format!("member {m} is not a member of parent {:?}", node.id),
                    ));
                }
            }
        }
        Ok(Self {
            nodes,
            children,
            roots,
            depth,
            n_hypotheses,
        })
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Depth of every node; roots are at depth 0.
    pub fn levels(&self) -> &[usize] {
        &self.depth
    }

    pub fn n_hypotheses(&self) -> usize {
        self.n_hypotheses
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Number of families: nodes with at least one child.
    pub fn family_count(&self) -> usize {
        self.children.iter().filter(|c| !c.is_empty()).count()
    }

    fn node_p_value(&self, node: usize, p: &PValueSet<T>, method: CombineMethod) -> Result<T> {
        let node = &self.nodes[node];
        if let Some(v) = node.p_value {
            return Ok(v);
        }
        let member_p: Vec<T> = node.members.iter().map(|&m| p.values()[m]).collect();
        Ok(combine_pvalues(&member_p, method)?.p_value)
    }
}

/// Test of the children of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTrace<T> {
    /// Id of the node whose children form the family.
    pub parent: String,
    pub children: Vec<String>,
    pub p_values: Vec<T>,
    pub rejection: RejectionResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalResult<T> {
    /// Rejected node ids in the order they were rejected.
    pub rejected_nodes: Vec<String>,
    /// Families in testing order (breadth first).
    pub per_family_traces: Vec<FamilyTrace<T>>,
    /// Number of families tested.
    pub visited: usize,
    /// Hypotheses covered by rejected leaves, ascending.
    pub rejected_hypotheses: Vec<usize>,
}

impl<T> HierarchicalResult<T> {
    pub fn is_node_rejected(&self, id: &str) -> bool {
        self.rejected_nodes.iter().any(|r| r == id)
    }
}

/// Tests the tree top-down: each top-level family with BH at `q`, then the
/// children of every rejected node as a separate family at `q`.
pub fn hierarchical_test<T: Scalar>(
    tree: &HypothesisTree<T>,
    p: &PValueSet<T>,
    q: Level<T>,
    node_method: CombineMethod,
) -> Result<HierarchicalResult<T>> {
    if p.len() != tree.n_hypotheses() {
        return Err(Error::invalid(format!(
            "tree covers {} hypotheses, p-value set has {}",
            tree.n_hypotheses(),
            p.len()
        )));
    }
    let mut rejected_nodes = Vec::new();
    let mut traces = Vec::new();
    let mut rejected_hypotheses = Vec::new();
    let mut queue: VecDeque<usize> = tree.roots().iter().copied().collect();
    while let Some(parent) = queue.pop_front() {
        let kids = tree.children(parent);
        if kids.is_empty() {
            continue;
        }
        let values = kids
            .iter()
            .map(|&c| tree.node_p_value(c, p, node_method))
            .collect::<Result<Vec<T>>>()?;
        let ids: Vec<String> = kids.iter().map(|&c| tree.nodes()[c].id.clone()).collect();
        let family = PValueSet::with_ids(values.clone(), ids.clone())?;
        let rejection = bh_step_up(&family, q);
        for &k in &rejection.rejected {
            let c = kids[k];
            rejected_nodes.push(ids[k].clone());
            if tree.children(c).is_empty() {
                rejected_hypotheses.extend_from_slice(&tree.nodes()[c].members);
            } else {
                queue.push_back(c);
            }
        }
        traces.push(FamilyTrace {
            parent: tree.nodes()[parent].id.clone(),
            children: ids,
            p_values: values,
            rejection,
        });
    }
    rejected_hypotheses.sort_unstable();
    rejected_hypotheses.dedup();
    Ok(HierarchicalResult {
        rejected_nodes,
        visited: traces.len(),
        per_family_traces: traces,
        rejected_hypotheses,
    })
}

/// Checks that every tested family belongs to a root or a rejected node and
/// that every rejected node sits in a tested family.
pub fn gating_holds<T: Scalar>(tree: &HypothesisTree<T>, result: &HierarchicalResult<T>) -> bool {
    let families_ok = result.per_family_traces.iter().all(|f| {
        tree.node_index(&f.parent)
            .is_some_and(|i| tree.levels()[i] == 0)
            || result.is_node_rejected(&f.parent)
    });
    let rejections_ok = result.rejected_nodes.iter().all(|id| {
        result
            .per_family_traces
            .iter()
            .any(|f| f.children.iter().any(|c| c == id))
    });
    families_ok && rejections_ok && result.visited <= tree.family_count()
}
