//! P-value vectors, global-null combining functions, all-descendant smoothing
//! and intersection-DAG p-values.

pub mod special;

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::dag::Dag;
use crate::error::{Error, Result};

pub use special::{chisq_survival, normal_cdf, normal_quantile};

/// Per-node p-values, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValues(Vec<f64>);

impl PValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPValue { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy with entry `i` replaced by `value`.
    pub fn with_value(&self, i: usize, value: f64) -> Result<Self> {
        let mut v = self.0.clone();
        v[i] = value;
        Self::new(v)
    }
}

impl Deref for PValues {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for PValues {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// A combining function mapping `n` p-values to one global-null p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combiner {
    Fisher,
    Stouffer,
    Simes,
    /// Calibrated `i`-th order statistic, `P(U_(i) <= p_(i))`. `i = 1` is
    /// Tippett's method. When fewer than `i` values are combined the largest
    /// order statistic is used.
    OrderStatistic(usize),
    Bonferroni,
}

impl Combiner {
    pub const TIPPETT: Combiner = Combiner::OrderStatistic(1);
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combiner::Fisher => f.write_str("fisher"),
            Combiner::Stouffer => f.write_str("stouffer"),
            Combiner::Simes => f.write_str("simes"),
            Combiner::OrderStatistic(1) => f.write_str("tippett"),
            Combiner::OrderStatistic(i) => write!(f, "orderstat:{i}"),
            Combiner::Bonferroni => f.write_str("bonferroni"),
        }
    }
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownName {
            kind: "combiner",
            input: s.to_string(),
        };
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "fisher" => Ok(Combiner::Fisher),
            "stouffer" => Ok(Combiner::Stouffer),
            "simes" => Ok(Combiner::Simes),
            "tippett" => Ok(Combiner::TIPPETT),
            "bonferroni" => Ok(Combiner::Bonferroni),
            other => {
                let i: usize = other
                    .strip_prefix("orderstat:")
                    .and_then(|rest| rest.parse().ok())
                    .ok_or_else(unknown)?;
                if i == 0 {
                    return Err(unknown());
                }
                Ok(Combiner::OrderStatistic(i))
            }
        }
    }
}

/// Combines `ps` into a single p-value.
///
/// Fisher and Stouffer return 0 when any input is exactly 0. Stouffer returns
/// 1 when an input is exactly 1 and none is 0.
pub fn combine(combiner: Combiner, ps: &[f64]) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (index, &value) in ps.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidPValue { index, value });
        }
    }
    let n = ps.len();
    let nf = n as f64;
    let out = match combiner {
        Combiner::Fisher => {
            if ps.contains(&0.0) {
                0.0
            } else {
                let stat: f64 = -2.0 * ps.iter().map(|p| p.ln()).sum::<f64>();
                chisq_survival(stat, 2.0 * nf)?
            }
        }
        Combiner::Stouffer => {
            if ps.contains(&0.0) {
                0.0
            } else if ps.contains(&1.0) {
                1.0
            } else {
                // Φ⁻¹(1 - p) = -Φ⁻¹(p), which keeps precision for small p.
                let mut z = 0.0;
                for &p in ps {
                    z -= normal_quantile(p)?;
                }
                special::normal_sf(z / nf.sqrt())
            }
        }
        Combiner::Simes => {
            let sorted = sorted(ps);
            sorted
                .iter()
                .enumerate()
                .map(|(k, &p)| nf * p / (k + 1) as f64)
                .fold(f64::INFINITY, f64::min)
        }
        Combiner::OrderStatistic(i) => {
            if i == 0 {
                return Err(Error::DomainError {
                    what: "order statistic index",
                    value: 0.0,
                });
            }
            let i = i.min(n);
            let sorted = sorted(ps);
            special::beta_cdf(sorted[i - 1], i as f64, (n - i + 1) as f64)
        }
        Combiner::Bonferroni => {
            let min = ps.iter().copied().fold(f64::INFINITY, f64::min);
            nf * min
        }
    };
    Ok(out.clamp(0.0, 1.0))
}

fn sorted(ps: &[f64]) -> Vec<f64> {
    let mut v = ps.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// All-descendant smoothing: each node's p-value is combined with the
/// p-values of all its descendants. Leaves keep their p-value unchanged.
pub fn smooth_all_descendants(dag: &Dag, pvec: &PValues, combiner: Combiner) -> Result<PValues> {
    if pvec.len() != dag.len() {
        return Err(Error::LengthMismatch {
            expected: dag.len(),
            got: pvec.len(),
        });
    }
    let mut buf = Vec::new();
    let mut out = Vec::with_capacity(pvec.len());
    for i in 0..dag.len() {
        let desc = dag.descendants(i)?;
        if desc.is_clear() {
            out.push(pvec[i]);
            continue;
        }
        buf.clear();
        buf.push(pvec[i]);
        buf.extend(desc.ones().map(|j| pvec[j]));
        out.push(combine(combiner, &buf)?);
    }
    PValues::new(out)
}

/// Node p-values for an intersection DAG: node `i` tests the intersection of
/// the item-level hypotheses in `annotations[i]`.
///
/// Requires `annotations[child] ⊆ annotations[parent]` along every edge.
pub fn intersection_dag_pvalues(
    dag: &Dag,
    annotations: &[Vec<usize>],
    item_pvalues: &PValues,
    combiner: Combiner,
) -> Result<PValues> {
    if annotations.len() != dag.len() {
        return Err(Error::LengthMismatch {
            expected: dag.len(),
            got: annotations.len(),
        });
    }
    let sets: Vec<HashSet<usize>> = annotations
        .iter()
        .map(|a| a.iter().copied().collect())
        .collect();
    for (node, set) in sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyAnnotation { node });
        }
        if let Some(&bad) = set.iter().find(|&&item| item >= item_pvalues.len()) {
            return Err(Error::NodeIdOutOfRange {
                id: bad,
                m: item_pvalues.len(),
            });
        }
    }
    for (parent, child) in dag.edges() {
        if !sets[child].is_subset(&sets[parent]) {
            return Err(Error::AnnotationNotNested { parent, child });
        }
    }
    let mut buf = Vec::new();
    let mut out = Vec::with_capacity(dag.len());
    for set in &sets {
        buf.clear();
        let mut items: Vec<usize> = set.iter().copied().collect();
        items.sort_unstable();
        buf.extend(items.into_iter().map(|j| item_pvalues[j]));
        out.push(combine(combiner, &buf)?);
    }
    PValues::new(out)
}
