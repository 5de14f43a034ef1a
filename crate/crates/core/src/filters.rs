//! Filters map a rejection set `R` (and the p-values) to a subset `U ⊆ R`.

use std::fmt;
use std::str::FromStr;

use crate::dag::{Dag, NodeSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// `U = R`.
    Trivial,
    /// Keep nodes whose ancestors are all in `R`.
    DagStructured,
    /// Keep nodes with no descendant in `R`.
    OuterNodes,
    /// Keep nodes with `p <= s`.
    Screening(f64),
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::Trivial => f.write_str("trivial"),
            FilterSpec::DagStructured => f.write_str("ds"),
            FilterSpec::OuterNodes => f.write_str("outer"),
            FilterSpec::Screening(s) => write!(f, "screen:{s}"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownName {
            kind: "filter",
            input: s.to_string(),
        };
        match s.trim() {
            "trivial" => Ok(FilterSpec::Trivial),
            "ds" => Ok(FilterSpec::DagStructured),
            "outer" => Ok(FilterSpec::OuterNodes),
            other => {
                let threshold: f64 = other
                    .strip_prefix("screen:")
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(unknown)?;
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(unknown());
                }
                Ok(FilterSpec::Screening(threshold))
            }
        }
    }
}

/// Whether `|F(R, p)|` is nondecreasing as `R` grows and `p` shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Monotone,
    NotMonotone,
}

impl FilterSpec {
    pub fn uses_structure(&self) -> bool {
        matches!(self, FilterSpec::DagStructured | FilterSpec::OuterNodes)
    }
}

/// Applies `spec` to the rejection set `r`.
pub fn apply_filter(spec: FilterSpec, dag: &Dag, r: &NodeSet, p: &[f64]) -> Result<NodeSet> {
    if let Some(id) = r.ones().find(|&v| v >= dag.len()) {
        return Err(Error::NodeIdOutOfRange { id, m: dag.len() });
    }
    let mut out = NodeSet::with_capacity(dag.len());
    match spec {
        FilterSpec::Trivial => out.union_with(r),
        FilterSpec::DagStructured => {
            for j in r.ones() {
                if dag.ancestors(j)?.is_subset(r) {
                    out.insert(j);
                }
            }
        }
        FilterSpec::OuterNodes => {
            for j in r.ones() {
                if dag.descendants(j)?.is_disjoint(r) {
                    out.insert(j);
                }
            }
        }
        FilterSpec::Screening(s) => {
            if p.len() != dag.len() {
                return Err(Error::LengthMismatch {
                    expected: dag.len(),
                    got: p.len(),
                });
            }
            for j in r.ones() {
                if p[j] <= s {
                    out.insert(j);
                }
            }
        }
    }
    Ok(out)
}

/// Monotonicity of `spec` on `dag`. The outer-nodes filter is monotone only on
/// trees.
pub fn is_monotonic(spec: FilterSpec, dag: &Dag) -> Monotonicity {
    match spec {
        FilterSpec::OuterNodes if !dag.is_tree() => Monotonicity::NotMonotone,
        _ => Monotonicity::Monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::node_set;

    fn ids(s: &NodeSet) -> Vec<usize> {
        s.ones().collect()
    }

    #[test]
    fn chain_examples() {
        let dag = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        let r = node_set(3, [0, 2]);
        let p = [0.0; 3];
        assert_eq!(
            ids(&apply_filter(FilterSpec::DagStructured, &dag, &r, &p).unwrap()),
            vec![0]
        );
        assert_eq!(
            ids(&apply_filter(FilterSpec::OuterNodes, &dag, &r, &p).unwrap()),
            vec![2]
        );
        let all = node_set(3, 0..3);
        assert_eq!(
            ids(&apply_filter(FilterSpec::DagStructured, &dag, &all, &p).unwrap()),
            vec![0, 1, 2]
        );
        assert_eq!(
            ids(&apply_filter(FilterSpec::Trivial, &dag, &r, &p).unwrap()),
            vec![0, 2]
        );
    }

    #[test]
    fn screening_cut() {
        let dag = Dag::new(2, &[]).unwrap();
        let r = node_set(2, [0, 1]);
        let out = apply_filter(FilterSpec::Screening(0.1), &dag, &r, &[0.05, 0.2]).unwrap();
        assert_eq!(ids(&out), vec![0]);
    }

    #[test]
    fn out_of_range_rejection_set() {
        let dag = Dag::new(2, &[]).unwrap();
        let r = node_set(5, [4]);
        assert_eq!(
            apply_filter(FilterSpec::Trivial, &dag, &r, &[0.1, 0.1]),
            Err(Error::NodeIdOutOfRange { id: 4, m: 2 })
        );
    }

    #[test]
    fn monotonicity_classification() {
        let chain = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        let diamond = Dag::new(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        assert_eq!(
            is_monotonic(FilterSpec::OuterNodes, &chain),
            Monotonicity::Monotone
        );
        assert_eq!(
            is_monotonic(FilterSpec::OuterNodes, &diamond),
            Monotonicity::NotMonotone
        );
        assert_eq!(
            is_monotonic(FilterSpec::DagStructured, &diamond),
            Monotonicity::Monotone
        );
        assert_eq!(
            is_monotonic(FilterSpec::Trivial, &diamond),
            Monotonicity::Monotone
        );
        assert_eq!(
            is_monotonic(FilterSpec::Screening(0.2), &diamond),
            Monotonicity::Monotone
        );
    }

    #[test]
    fn names() {
        for name in ["trivial", "ds", "outer", "screen:0.25"] {
            assert_eq!(name.parse::<FilterSpec>().unwrap().to_string(), name);
        }
        assert!("screen:2".parse::<FilterSpec>().is_err());
        assert!("clump".parse::<FilterSpec>().is_err());
    }
}
