//! Testing with structure over the hypotheses: combining tests, cluster
//! (enrichment) testing, hierarchical trees and two-stage screening.
//!
//! Every family in a hierarchical run is tested at the same level `q`. The
//! tree-wide error rate this yields is measured by simulation, not claimed.

pub mod cluster;
pub mod combine;
pub mod screen;
pub mod tree;

pub use cluster::{cluster_test, ClusterPartition, ClusterTestResult};
pub use combine::{combine_pvalues, CombineMethod, Combined};
pub use screen::{two_stage_screen, ScreenResult};
pub use tree::{
    gating_holds, hierarchical_test, FamilyTrace, HierarchicalResult, HypothesisTree, TreeNode,
};
