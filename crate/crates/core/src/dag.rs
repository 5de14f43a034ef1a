//! Hypothesis DAG and the structural indices the procedures rely on.
//!
//! Nodes are dense integer ids in `0..m`. An edge `(parent, child)` points
//! from the more general hypothesis to the more specific one. Depths are
//! 1-based: every root sits at depth 1 and every other node sits one level
//! below its deepest parent.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

/// A set of node ids, stored densely.
pub type NodeSet = FixedBitSet;

/// Builds a [`NodeSet`] over `m` nodes from a list of ids.
pub fn node_set(m: usize, ids: impl IntoIterator<Item = usize>) -> NodeSet {
    let mut set = FixedBitSet::with_capacity(m);
    for id in ids {
        set.insert(id);
    }
    set
}

#[derive(Debug, Clone)]
struct Closure {
    ancestors: Vec<FixedBitSet>,
    descendants: Vec<FixedBitSet>,
}

/// Immutable directed acyclic graph over hypotheses `0..m`.
#[derive(Debug, Clone)]
pub struct Dag {
    m: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
    n_edges: usize,
    closure: OnceLock<Closure>,
}

impl Dag {
    /// Validates the edge list and builds adjacency indices.
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); m];
        let mut children = vec![Vec::new(); m];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(p, c) in edges {
            for id in [p, c] {
                if id >= m {
                    return Err(Error::NodeIdOutOfRange { id, m });
                }
            }
            if p == c {
                return Err(Error::SelfLoop { node: p });
            }
            if !seen.insert((p, c)) {
                return Err(Error::DuplicateEdge {
                    parent: p,
                    child: c,
                });
            }
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm; smallest-id-first keeps the order deterministic.
        let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..m).filter(|&v| indeg[v] == 0).collect();
        let mut topo = Vec::with_capacity(m);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() < m {
            let node = (0..m).find(|&v| indeg[v] > 0).unwrap_or(0);
            return Err(Error::CycleDetected { node });
        }

        Ok(Self {
            m,
            parents,
            children,
            topo,
            n_edges: edges.len(),
            closure: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// All edges as `(parent, child)`, ordered by parent then child.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(p, cs)| cs.iter().map(move |&c| (p, c)))
    }

    /// A topological order: every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.m)
            .filter(|&v| self.parents[v].is_empty())
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.m)
            .filter(|&v| self.children[v].is_empty())
            .collect()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// True iff every non-root node has exactly one parent.
    pub fn is_tree(&self) -> bool {
        self.parents.iter().all(|ps| ps.len() <= 1)
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.m {
            Err(Error::NodeIdOutOfRange {
                id: node,
                m: self.m,
            })
        } else {
            Ok(())
        }
    }

    fn closure(&self) -> &Closure {
        self.closure.get_or_init(|| {
            let mut descendants = vec![FixedBitSet::with_capacity(self.m); self.m];
            for &v in self.topo.iter().rev() {
                let mut acc = FixedBitSet::with_capacity(self.m);
                for &c in &self.children[v] {
                    acc.insert(c);
                    acc.union_with(&descendants[c]);
                }
                descendants[v] = acc;
            }
            let mut ancestors = vec![FixedBitSet::with_capacity(self.m); self.m];
            for &v in &self.topo {
                let mut acc = FixedBitSet::with_capacity(self.m);
                for &p in &self.parents[v] {
                    acc.insert(p);
                    acc.union_with(&ancestors[p]);
                }
                ancestors[v] = acc;
            }
            Closure {
                ancestors,
                descendants,
            }
        })
    }

    /// Strict ancestors of `node` (the node itself excluded).
    pub fn ancestors(&self, node: usize) -> Result<&NodeSet> {
        self.check_node(node)?;
        Ok(&self.closure().ancestors[node])
    }

    /// Strict descendants of `node` (the node itself excluded).
    pub fn descendants(&self, node: usize) -> Result<&NodeSet> {
        self.check_node(node)?;
        Ok(&self.closure().descendants[node])
    }

    /// True iff every ancestor of every node in `nonnull` is also in `nonnull`.
    pub fn check_heredity(&self, nonnull: &NodeSet) -> bool {
        let closure = self.closure();
        nonnull
            .ones()
            .filter(|&v| v < self.m)
            .all(|v| closure.ancestors[v].is_subset(nonnull))
    }
}

/// Node depths and the per-depth level sets `H_d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthIndex {
    depth: Vec<usize>,
    levels: Vec<Vec<usize>>,
}

impl DepthIndex {
    pub fn new(dag: &Dag) -> Self {
        let mut depth = vec![1usize; dag.len()];
        for &v in dag.topological_order() {
            if let Some(d) = dag.parents(v).iter().map(|&p| depth[p]).max() {
                depth[v] = d + 1;
            }
        }
        let max = depth.iter().copied().max().unwrap_or(0);
        let mut levels = vec![Vec::new(); max];
        for (v, &d) in depth.iter().enumerate() {
            levels[d - 1].push(v);
        }
        Self { depth, levels }
    }

    /// Depth of `node`, starting at 1 for roots.
    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    /// Maximum depth `D` (0 for the empty graph).
    pub fn max_depth(&self) -> usize {
        self.levels.len()
    }

    /// Nodes at depth `d` (1-based), sorted by id.
    pub fn level(&self, d: usize) -> &[usize] {
        &self.levels[d - 1]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }
}

/// The parent that keys a group. Roots share a virtual parent that is never a
/// node of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKey {
    Roots,
    Parent(usize),
}

/// `Ch(a) ∩ H_d` for one parent `a` and depth `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub key: GroupKey,
    pub depth: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupIndex {
    groups: Vec<Group>,
    by_depth: Vec<Vec<usize>>,
    node_groups: Vec<Vec<usize>>,
}

impl GroupIndex {
    pub fn new(dag: &Dag, depths: &DepthIndex) -> Self {
        let mut keyed: BTreeMap<(usize, GroupKey), Vec<usize>> = BTreeMap::new();
        for v in 0..dag.len() {
            let d = depths.depth(v);
            if dag.parents(v).is_empty() {
                keyed.entry((d, GroupKey::Roots)).or_default().push(v);
            } else {
                for &p in dag.parents(v) {
                    keyed.entry((d, GroupKey::Parent(p))).or_default().push(v);
                }
            }
        }

        let mut groups = Vec::with_capacity(keyed.len());
        let mut by_depth = vec![Vec::new(); depths.max_depth()];
        let mut node_groups = vec![Vec::new(); dag.len()];
        for ((depth, key), members) in keyed {
            let gid = groups.len();
            by_depth[depth - 1].push(gid);
            for &v in &members {
                node_groups[v].push(gid);
            }
            groups.push(Group {
                key,
                depth,
                members,
            });
        }
        Self {
            groups,
            by_depth,
            node_groups,
        }
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, gid: usize) -> &Group {
        &self.groups[gid]
    }

    /// Group ids at depth `d` (1-based).
    pub fn at_depth(&self, d: usize) -> &[usize] {
        &self.by_depth[d - 1]
    }

    /// `n_d`, the number of groups at depth `d`.
    pub fn count_at_depth(&self, d: usize) -> usize {
        self.by_depth[d - 1].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.by_depth.iter().map(Vec::len).collect()
    }

    /// Groups containing `node`; one per parent, or the root group.
    pub fn groups_of(&self, node: usize) -> &[usize] {
        &self.node_groups[node]
    }
}

/// Depths at which no two nodes share a descendant.
pub fn disjoint_descendant_depths(dag: &Dag, depths: &DepthIndex) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    'depth: for d in 1..=depths.max_depth() {
        let mut seen = FixedBitSet::with_capacity(dag.len());
        for &v in depths.level(d) {
            let desc = &dag.closure().descendants[v];
            if !seen.is_disjoint(desc) {
                continue 'depth;
            }
            seen.union_with(desc);
        }
        out.insert(d);
    }
    out
}

/// A graph together with its depth and group indices.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub dag: Dag,
    pub depths: DepthIndex,
    pub groups: GroupIndex,
}

impl Hierarchy {
    pub fn new(dag: Dag) -> Self {
        let depths = DepthIndex::new(&dag);
        let groups = GroupIndex::new(&dag, &depths);
        Self {
            dag,
            depths,
            groups,
        }
    }

    pub fn len(&self) -> usize {
        self.dag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dag.is_empty()
    }
}
