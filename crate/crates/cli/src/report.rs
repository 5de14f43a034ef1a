//! Serialized outputs of `analyze` and `graph-info`.

use focusfdr::dag::disjoint_descendant_depths;
use focusfdr::Hierarchy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSummary {
    pub m: usize,
    pub edges: usize,
    pub max_depth: usize,
    /// `|H_d|` for `d = 1..=max_depth`.
    pub level_sizes: Vec<usize>,
    /// `n_d`, the number of parent groups at each depth.
    pub group_counts: Vec<usize>,
    pub is_tree: bool,
    pub disjoint_descendant_depths: Vec<usize>,
    pub roots: usize,
    pub leaves: usize,
}

impl StructureSummary {
    pub fn new(h: &Hierarchy) -> Self {
        Self {
            m: h.len(),
            edges: h.dag.edge_count(),
            max_depth: h.depths.max_depth(),
            level_sizes: h.depths.level_sizes(),
            group_counts: h.groups.counts(),
            is_tree: h.dag.is_tree(),
            disjoint_descendant_depths: disjoint_descendant_depths(&h.dag, &h.depths)
                .into_iter()
                .collect(),
            roots: h.dag.roots().len(),
            leaves: h.dag.leaves().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub method: String,
    pub filter: String,
    pub q: f64,
    pub lambda: f64,
    pub lambda_policy: String,
    pub c: usize,
    pub dw: String,
    pub smoothing: Option<String>,
    pub reshaping: Option<String>,
    /// Combiner used to build node p-values from items, in intersection mode.
    pub intersection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeName {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub id: usize,
    pub name: String,
    pub depth: usize,
    pub p: f64,
    pub weight: f64,
    pub weighted_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub parameters: Parameters,
    pub structure: StructureSummary,
    pub weighted_depths: Vec<usize>,
    pub t_star: Option<f64>,
    pub rejected: usize,
    pub discovered: usize,
    pub discoveries: Vec<Discovery>,
    /// 1-based ids in the order nodes first appear in the edge file.
    pub nodes: Vec<NodeName>,
}
