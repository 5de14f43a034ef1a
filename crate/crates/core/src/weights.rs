//! Data-adaptive weights built from group-wise Storey null-proportion
//! estimates.
//!
//! At each depth `d` the nodes are grouped by parent: the group of parent `a`
//! is `Ch(a) ∩ H_d`, and the roots form one group under a virtual parent. A
//! group's weight is its Storey estimate scaled by
//! `K = |group| / |H_d| · n_d` (or just `K` for groups of size `<= c`). A node
//! in several groups gets the reciprocal of the mean of the groups' reciprocal
//! weights. Depths outside the weighted set get weight exactly 1.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::combine::PValues;
use crate::dag::{DepthIndex, GroupIndex, Hierarchy};
use crate::error::{Error, Result};

/// Which depths receive data-adaptive weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DwMode {
    /// Structure-only rule: a depth is weighted unless its smallest possible
    /// weight exceeds 1.
    Auto,
    /// No depth is weighted; every weight is 1.
    AllUnity,
    Explicit(BTreeSet<usize>),
}

impl fmt::Display for DwMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DwMode::Auto => f.write_str("auto"),
            DwMode::AllUnity => f.write_str("none"),
            DwMode::Explicit(depths) => {
                let parts: Vec<String> = depths.iter().map(usize::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for DwMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(DwMode::Auto),
            "none" | "" => Ok(DwMode::AllUnity),
            list => list
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<BTreeSet<_>, _>>()
                .map(DwMode::Explicit)
                .map_err(|_| Error::UnknownName {
                    kind: "weighted depth set",
                    input: s.to_string(),
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig {
    pub lambda: f64,
    /// Groups of size `<= c` skip the Storey estimate.
    pub c: usize,
    pub dw: DwMode,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            c: 1,
            dw: DwMode::Auto,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

/// Per-node weights together with the depth set that was weighted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    values: Vec<f64>,
    resolved_dw: BTreeSet<usize>,
}

impl WeightVector {
    pub fn unity(m: usize) -> Self {
        Self {
            values: vec![1.0; m],
            resolved_dw: BTreeSet::new(),
        }
    }

    /// Fixed weights, e.g. a constant null-proportion estimate.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some((node, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &w)| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::NonpositiveWeight { node, value });
        }
        Ok(Self {
            values,
            resolved_dw: BTreeSet::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn resolved_dw(&self) -> &BTreeSet<usize> {
        &self.resolved_dw
    }
}

/// Storey's estimator `(1 + #{p > λ}) / (n (1 - λ))`.
pub fn storey_pi0(pvals: &[f64], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if pvals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let above = pvals.iter().filter(|&&p| p > lambda).count();
    Ok(storey_from_count(above, pvals.len(), lambda))
}

/// Storey's estimator applied to the p-values of one group.
pub fn group_storey(group_pvals: &[f64], lambda: f64) -> Result<f64> {
    storey_pi0(group_pvals, lambda)
}

fn storey_from_count(above: usize, n: usize, lambda: f64) -> f64 {
    (1.0 + above as f64) / ((1.0 - lambda) * n as f64)
}

/// Smallest weight a node at depth `d` can receive through the Storey branch:
/// `n_d / ((1 - λ) |H_d|)`.
pub fn min_possible_weight(
    depths: &DepthIndex,
    groups: &GroupIndex,
    d: usize,
    lambda: f64,
    c: usize,
) -> Result<f64> {
    check_lambda(lambda)?;
    if d == 0 || d > depths.max_depth() {
        return Err(Error::DepthOutOfRange {
            depth: d,
            max: depths.max_depth(),
        });
    }
    let eligible = groups
        .at_depth(d)
        .iter()
        .any(|&g| groups.group(g).members.len() > c);
    if !eligible {
        return Err(Error::NoEligibleGroup { depth: d, c });
    }
    let n_d = groups.count_at_depth(d) as f64;
    Ok(n_d / ((1.0 - lambda) * depths.level(d).len() as f64))
}

/// Weighted depths chosen from structure alone.
///
/// A depth is kept when its smallest possible weight is at most 1. Depths whose
/// groups are all of size `<= c` carry only the data-free `K` factors and are
/// always kept.
pub fn auto_dw(depths: &DepthIndex, groups: &GroupIndex, lambda: f64, c: usize) -> BTreeSet<usize> {
    (1..=depths.max_depth())
        .filter(
            |&d| match min_possible_weight(depths, groups, d, lambda, c) {
                Ok(w) => w <= 1.0,
                Err(_) => true,
            },
        )
        .collect()
}

/// Resolves the configured depth set against a concrete hierarchy.
pub fn resolve_dw(h: &Hierarchy, config: &WeightConfig) -> Result<BTreeSet<usize>> {
    config.validate()?;
    match &config.dw {
        DwMode::Auto => Ok(auto_dw(&h.depths, &h.groups, config.lambda, config.c)),
        DwMode::AllUnity => Ok(BTreeSet::new()),
        DwMode::Explicit(set) => {
            let max = h.depths.max_depth();
            if let Some(&depth) = set.iter().find(|&&d| d == 0 || d > max) {
                return Err(Error::DepthOutOfRange { depth, max });
            }
            Ok(set.clone())
        }
    }
}

/// Group weights for the DAG of a [`Hierarchy`], with the structural parts
/// (group sizes, `K` factors, weighted depths) precomputed.
#[derive(Debug, Clone)]
pub struct DagWeigher<'a> {
    h: &'a Hierarchy,
    lambda: f64,
    c: usize,
    dw: BTreeSet<usize>,
    k: Vec<f64>,
    gated: Vec<bool>,
}

impl<'a> DagWeigher<'a> {
    pub fn new(h: &'a Hierarchy, config: &WeightConfig) -> Result<Self> {
        let dw = resolve_dw(h, config)?;
        let k = h
            .groups
            .groups()
            .iter()
            .map(|g| {
                let level = h.depths.level(g.depth).len() as f64;
                let n_d = h.groups.count_at_depth(g.depth) as f64;
                g.members.len() as f64 / level * n_d
            })
            .collect();
        let gated = (0..h.len())
            .map(|v| dw.contains(&h.depths.depth(v)))
            .collect();
        Ok(Self {
            h,
            lambda: config.lambda,
            c: config.c,
            dw,
            k,
            gated,
        })
    }

    pub fn resolved_dw(&self) -> &BTreeSet<usize> {
        &self.dw
    }

    /// Number of members of each group with p-value above λ.
    pub fn exceedances(&self, p: &[f64]) -> Vec<usize> {
        self.h
            .groups
            .groups()
            .iter()
            .map(|g| g.members.iter().filter(|&&j| p[j] > self.lambda).count())
            .collect()
    }

    fn group_weight(&self, gid: usize, above: usize) -> f64 {
        let size = self.h.groups.group(gid).members.len();
        if size > self.c {
            storey_from_count(above, size, self.lambda) * self.k[gid]
        } else {
            self.k[gid]
        }
    }

    /// `1 / ŵ_node` given group exceedance counts; when `zeroed` is set the
    /// node's own p-value is treated as 0.
    fn inverse_weight(&self, node: usize, above: &[usize], zeroed: Option<bool>) -> f64 {
        if !self.gated[node] {
            return 1.0;
        }
        let gids = self.h.groups.groups_of(node);
        let sum: f64 = gids
            .iter()
            .map(|&g| {
                let count = match zeroed {
                    Some(true) => above[g] - 1,
                    _ => above[g],
                };
                1.0 / self.group_weight(g, count)
            })
            .sum();
        sum / gids.len() as f64
    }

    pub fn weights(&self, pvec: &PValues) -> Result<WeightVector> {
        self.check_len(pvec)?;
        let above = self.exceedances(pvec);
        let values = (0..self.h.len())
            .map(|v| 1.0 / self.inverse_weight(v, &above, None))
            .collect();
        Ok(WeightVector {
            values,
            resolved_dw: self.dw.clone(),
        })
    }

    /// `1 / ŵ_node(p_{0,node})`: the inverse weight of `node` after its own
    /// p-value is replaced by 0. `above` must come from [`Self::exceedances`].
    pub fn inverse_weight_zeroed(&self, pvec: &[f64], above: &[usize], node: usize) -> f64 {
        self.inverse_weight(node, above, Some(pvec[node] > self.lambda))
    }

    fn check_len(&self, pvec: &PValues) -> Result<()> {
        if pvec.len() != self.h.len() {
            return Err(Error::LengthMismatch {
                expected: self.h.len(),
                got: pvec.len(),
            });
        }
        Ok(())
    }
}

/// Data-adaptive DAG weights for the given p-values.
pub fn dag_weights(h: &Hierarchy, pvec: &PValues, config: &WeightConfig) -> Result<WeightVector> {
    DagWeigher::new(h, config)?.weights(pvec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::Dag;

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    fn wide_tree() -> Hierarchy {
        let mut edges = Vec::new();
        for r in 0..50 {
            for k in 0..10 {
                edges.push((r, 50 + 10 * r + k));
            }
        }
        Hierarchy::new(Dag::new(550, &edges).unwrap())
    }

    #[test]
    fn storey_examples() {
        close(storey_pi0(&[0.9, 0.8, 0.1, 0.2], 0.5).unwrap(), 1.5);
        let ten = [0.9, 0.6, 0.7, 0.8, 0.1, 0.2, 0.3, 0.4, 0.5, 0.05];
        close(storey_pi0(&ten, 0.5).unwrap(), 1.0);
        close(storey_pi0(&[0.0; 8], 0.5).unwrap(), 1.0 / (0.5 * 8.0));
        close(group_storey(&[0.9; 10], 0.5).unwrap(), 2.2);
        close(group_storey(&[0.1; 10], 0.5).unwrap(), 0.2);
        close(group_storey(&[0.9], 0.5).unwrap(), 4.0);
        assert_eq!(storey_pi0(&[], 0.5), Err(Error::EmptyInput));
        assert_eq!(storey_pi0(&[0.2], 1.0), Err(Error::LambdaOutOfRange(1.0)));
        assert_eq!(storey_pi0(&[0.2], 0.0), Err(Error::LambdaOutOfRange(0.0)));
    }

    #[test]
    fn wide_tree_leaf_group_weight() {
        let h = wide_tree();
        let mut p = vec![0.01; 550];
        p[50..60].fill(0.9);
        let cfg = WeightConfig {
            lambda: 0.5,
            c: 0,
            dw: DwMode::Auto,
        };
        let w = dag_weights(&h, &PValues::new(p).unwrap(), &cfg).unwrap();
        for leaf in 50..60 {
            close(w.get(leaf), 2.2);
        }
        close(w.get(60), 0.2);
        assert_eq!(w.resolved_dw(), &BTreeSet::from([1, 2]));
    }

    #[test]
    fn large_threshold_falls_back_to_k() {
        let h = wide_tree();
        let cfg = WeightConfig {
            lambda: 0.5,
            c: 50,
            dw: DwMode::Explicit(BTreeSet::from([1])),
        };
        let p = PValues::new(vec![0.9; 550]).unwrap();
        let w = dag_weights(&h, &p, &cfg).unwrap();
        for r in 0..50 {
            close(w.get(r), 1.0);
        }
        for leaf in 50..550 {
            assert_eq!(w.get(leaf), 1.0);
        }
    }

    #[test]
    fn empty_dw_gives_unity() {
        let h = wide_tree();
        let cfg = WeightConfig {
            dw: DwMode::AllUnity,
            ..WeightConfig::default()
        };
        let p = PValues::new(vec![0.3; 550]).unwrap();
        let w = dag_weights(&h, &p, &cfg).unwrap();
        assert!(w.values().iter().all(|&x| x == 1.0));
        assert!(w.resolved_dw().is_empty());
    }

    #[test]
    fn two_parent_node_averages_inverses() {
        // Roots 0, 1. Parent 0 has children {2, 3}; parent 1 has children {3}.
        // Node 3 belongs to both depth-2 groups.
        let h = Hierarchy::new(Dag::new(4, &[(0, 2), (0, 3), (1, 3)]).unwrap());
        assert_eq!(h.groups.count_at_depth(2), 2);
        // c = 1: group {2,3} uses Storey, singleton {3} uses K only.
        // K for {2,3} = 2/2 * 2 = 2; K for {3} = 1/2 * 2 = 1.
        let p = PValues::new(vec![0.1, 0.1, 0.9, 0.1]).unwrap();
        let cfg = WeightConfig {
            lambda: 0.5,
            c: 1,
            dw: DwMode::Explicit(BTreeSet::from([2])),
        };
        let w = dag_weights(&h, &p, &cfg).unwrap();
        // Group {2,3}: Storey = (1 + 1)/(0.5 * 2) = 2, times K = 2 -> 4.
        close(w.get(2), 4.0);
        // Node 3: 1/w = (1/4 + 1/1) / 2 = 0.625.
        close(w.get(3), 1.0 / 0.625);
        assert_eq!(w.get(0), 1.0);
    }

    #[test]
    fn hand_averaging_example() {
        // Two groups with weights 2 and 0.5: w^{-1} = (1/2)(1/2 + 2) = 1.25.
        let inv: f64 = (1.0 / 2.0 + 1.0 / 0.5) / 2.0;
        close(inv, 1.25);
        close(1.0 / inv, 0.8);
    }

    #[test]
    fn min_weight_and_auto_rule() {
        let h = wide_tree();
        close(
            min_possible_weight(&h.depths, &h.groups, 2, 0.5, 1).unwrap(),
            0.2,
        );
        close(
            min_possible_weight(&h.depths, &h.groups, 1, 0.5, 1).unwrap(),
            2.0 / 50.0,
        );
        assert_eq!(
            min_possible_weight(&h.depths, &h.groups, 2, 0.5, 10),
            Err(Error::NoEligibleGroup { depth: 2, c: 10 })
        );
        assert_eq!(
            auto_dw(&h.depths, &h.groups, 0.5, 1),
            BTreeSet::from([1, 2])
        );
    }

    #[test]
    fn explicit_depth_out_of_range() {
        let h = wide_tree();
        let cfg = WeightConfig {
            dw: DwMode::Explicit(BTreeSet::from([3])),
            ..WeightConfig::default()
        };
        assert_eq!(
            DagWeigher::new(&h, &cfg).unwrap_err(),
            Error::DepthOutOfRange { depth: 3, max: 2 }
        );
    }

    #[test]
    fn zeroed_inverse_matches_recompute() {
        let h = Hierarchy::new(Dag::new(5, &[(0, 2), (0, 3), (1, 3), (1, 4)]).unwrap());
        let cfg = WeightConfig {
            lambda: 0.5,
            c: 0,
            dw: DwMode::Explicit(BTreeSet::from([1, 2])),
        };
        let p = PValues::new(vec![0.7, 0.2, 0.9, 0.6, 0.55]).unwrap();
        let weigher = DagWeigher::new(&h, &cfg).unwrap();
        let above = weigher.exceedances(&p);
        for i in 0..5 {
            let direct = 1.0
                / weigher
                    .weights(&p.with_value(i, 0.0).unwrap())
                    .unwrap()
                    .get(i);
            close(weigher.inverse_weight_zeroed(&p, &above, i), direct);
        }
    }

    #[test]
    fn dw_mode_parsing() {
        assert_eq!("auto".parse::<DwMode>().unwrap(), DwMode::Auto);
        assert_eq!("none".parse::<DwMode>().unwrap(), DwMode::AllUnity);
        assert_eq!(
            "1, 3".parse::<DwMode>().unwrap(),
            DwMode::Explicit(BTreeSet::from([1, 3]))
        );
        assert!("1,x".parse::<DwMode>().is_err());
    }
}
