//! Step-up testing procedures.
//!
//! The central routine is the weighted focused step-up: weighted p-values
//! `ŵ_i p_i` are thresholded at the largest candidate `t` in
//! `{0} ∪ {ŵ_i p_i}` whose estimated false discovery proportion
//! `m t / β(|F({i : ŵ_i p_i <= t}, p)|)` is at most `q`, and the filter is
//! applied once more to the base rejection set at that threshold. With unity
//! weights this is Focused BH; with the identity `β` it is Weighted Focused BH.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::combine::PValues;
use crate::dag::{Dag, Hierarchy, NodeSet};
use crate::error::{Error, Result};
use crate::filters::{apply_filter, FilterSpec};
use crate::weights::{dag_weights, storey_pi0, WeightConfig, WeightVector};

/// Divisor applied to `q` for the tree baseline: `q / (2 · 1.44)`.
pub const YEKUTIELI_DIVISOR: f64 = 2.0 * 1.44;

/// A reshaping function `β` with `β(0) = 0`, `β(r) <= r`, `β` nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Reshaping {
    Identity,
    /// `β(r) = r / (1 + 1/2 + … + 1/m)`.
    BenjaminiYekutieli(usize),
    /// `β(r)` tabulated for `r = 0, 1, …`.
    Custom(Vec<f64>),
}

impl Reshaping {
    /// Checks the reshaping conditions for use with `m` hypotheses.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            Reshaping::Identity => Ok(()),
            Reshaping::BenjaminiYekutieli(n) if *n == 0 => Err(Error::InvalidReshaping(
                "BY reshaping needs at least one hypothesis".into(),
            )),
            Reshaping::BenjaminiYekutieli(_) => Ok(()),
            Reshaping::Custom(table) => {
                if table.len() < m + 1 {
                    return Err(Error::InvalidReshaping(format!(
                        "table has {} entries, need {}",
                        table.len(),
                        m + 1
                    )));
                }
                if table[0] != 0.0 {
                    return Err(Error::InvalidReshaping("beta(0) must be 0".into()));
                }
                for (r, &b) in table.iter().enumerate() {
                    if !(b.is_finite() && b >= 0.0 && b <= r as f64) {
                        return Err(Error::InvalidReshaping(format!(
                            "beta({r}) = {b} violates 0 <= beta(r) <= r"
                        )));
                    }
                    if r > 0 && b < table[r - 1] {
                        return Err(Error::InvalidReshaping(format!(
                            "beta decreases at r = {r}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, r: usize) -> f64 {
        match self {
            Reshaping::Identity => r as f64,
            Reshaping::BenjaminiYekutieli(m) => r as f64 / harmonic(*m),
            Reshaping::Custom(table) => table[r],
        }
    }
}

fn harmonic(m: usize) -> f64 {
    (1..=m).map(|i| 1.0 / i as f64).sum()
}

/// Result of a weighted focused step-up run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcedureResult {
    pub t_star: f64,
    /// `R* = {i : ŵ_i p_i <= t*}`, sorted.
    pub base_set: Vec<usize>,
    /// `U* = F(R*, p)`, sorted.
    pub discovery_set: Vec<usize>,
    pub weights: WeightVector,
    pub fdp_hat_at_tstar: f64,
    /// Number of distinct candidate thresholds, including 0.
    pub candidate_count: usize,
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::QOutOfRange(q))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// Classic Benjamini–Hochberg step-up. Returns rejected ids, sorted.
pub fn bh(pvec: &PValues, q: f64) -> Result<Vec<usize>> {
    check_q(q)?;
    let m = pvec.len() as f64;
    Ok(step_up(pvec, |k| k as f64 * q / m))
}

/// Storey-adaptive BH: step-up against `k q / (m π̂₀)`.
pub fn storey_bh(pvec: &PValues, q: f64, lambda: f64) -> Result<Vec<usize>> {
    check_q(q)?;
    let pi0 = storey_pi0(pvec, lambda)?;
    let m = pvec.len() as f64;
    Ok(step_up(pvec, |k| k as f64 * q / (m * pi0)))
}

fn step_up(p: &[f64], threshold: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (1..=sorted.len())
        .rev()
        .find(|&k| sorted[k - 1] <= threshold(k));
    match k {
        Some(k) => {
            let cut = sorted[k - 1];
            (0..p.len()).filter(|&i| p[i] <= cut).collect()
        }
        None => Vec::new(),
    }
}

/// Weighted Focused BH.
pub fn wfbh(
    dag: &Dag,
    pvec: &PValues,
    weights: &WeightVector,
    filter: FilterSpec,
    q: f64,
) -> Result<ProcedureResult> {
    weighted_reshaped_fbh(dag, pvec, weights, filter, q, &Reshaping::Identity)
}

/// Focused BH: [`wfbh`] with unity weights.
pub fn fbh(dag: &Dag, pvec: &PValues, filter: FilterSpec, q: f64) -> Result<ProcedureResult> {
    wfbh(dag, pvec, &WeightVector::unity(pvec.len()), filter, q)
}

/// Weighted Reshaped Focused BH; the estimated FDP uses `β(|F(R)|)` in the
/// denominator.
pub fn weighted_reshaped_fbh(
    dag: &Dag,
    pvec: &PValues,
    weights: &WeightVector,
    filter: FilterSpec,
    q: f64,
    beta: &Reshaping,
) -> Result<ProcedureResult> {
    check_q(q)?;
    let m = dag.len();
    check_len(m, pvec.len())?;
    check_len(m, weights.len())?;
    beta.validate(m)?;
    for (node, &value) in weights.values().iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonpositiveWeight { node, value });
        }
    }

    let weighted: Vec<f64> = pvec
        .iter()
        .zip(weights.values())
        .map(|(p, w)| p * w)
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| weighted[a].total_cmp(&weighted[b]).then(a.cmp(&b)));

    // Distinct candidates ascending, each with the size of {i : ŵ_i p_i <= t}.
    let mut candidates: Vec<(f64, usize)> = vec![(0.0, 0)];
    for (pos, &i) in order.iter().enumerate() {
        let t = weighted[i];
        let last = candidates.last_mut().expect("nonempty");
        if t == last.0 {
            last.1 = pos + 1;
        } else {
            candidates.push((t, pos + 1));
        }
    }

    let mf = m as f64;
    let mut chosen = (0.0, candidates[0].1);
    for &(t, k) in candidates.iter().rev() {
        if t == 0.0 {
            break;
        }
        // |F(R)| <= |R| and β is nondecreasing, so this bound prunes cheaply.
        if fdp_hat(mf, t, beta.apply(k)) > q {
            continue;
        }
        let r = prefix_set(m, &order[..k]);
        let kept = apply_filter(filter, dag, &r, pvec)?.count_ones(..);
        if fdp_hat(mf, t, beta.apply(kept)) <= q {
            chosen = (t, k);
            break;
        }
    }

    let (t_star, k) = chosen;
    let base = prefix_set(m, &order[..k]);
    let discoveries = apply_filter(filter, dag, &base, pvec)?;
    let n_disc = discoveries.count_ones(..);
    let fdp_hat_at_tstar = fdp_hat(mf, t_star, beta.apply(n_disc));
    Ok(ProcedureResult {
        t_star,
        base_set: base.ones().collect(),
        discovery_set: discoveries.ones().collect(),
        weights: weights.clone(),
        fdp_hat_at_tstar,
        candidate_count: candidates.len(),
    })
}

/// `m t / β`, with `0 / 0 = 0` and `t / 0 = ∞` for `t > 0`.
fn fdp_hat(m: f64, t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if beta == 0.0 {
        f64::INFINITY
    } else {
        m * t / beta
    }
}

fn prefix_set(m: usize, ids: &[usize]) -> NodeSet {
    let mut set = NodeSet::with_capacity(m);
    for &i in ids {
        set.insert(i);
    }
    set
}

/// Simplified top-down tree procedure: BH at `level` on the roots, then BH
/// at `level` on the children of every rejected node, recursively.
///
/// This is a sketch of Yekutieli's hierarchical method, not a reference
/// implementation.
pub fn yekutieli_tree(dag: &Dag, pvec: &PValues, level: f64) -> Result<Vec<usize>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::LevelOutOfRange(level));
    }
    if !dag.is_tree() {
        return Err(Error::NotATree);
    }
    check_len(dag.len(), pvec.len())?;

    let mut rejected = Vec::new();
    let mut families = vec![dag.roots()];
    while let Some(family) = families.pop() {
        if family.is_empty() {
            continue;
        }
        let local = PValues::new(family.iter().map(|&i| pvec[i]).collect())?;
        for j in bh(&local, level)? {
            let node = family[j];
            rejected.push(node);
            families.push(dag.children(node).to_vec());
        }
    }
    rejected.sort_unstable();
    Ok(rejected)
}

/// Testing procedures selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Bh,
    StoreyBh,
    By,
    Fbh,
    Wfbh,
    Wrfbh,
    YekutieliTree,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Bh,
        Method::StoreyBh,
        Method::By,
        Method::Fbh,
        Method::Wfbh,
        Method::Wrfbh,
        Method::YekutieliTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bh => "bh",
            Method::StoreyBh => "storey-bh",
            Method::By => "by",
            Method::Fbh => "fbh",
            Method::Wfbh => "wfbh",
            Method::Wrfbh => "wrfbh",
            Method::YekutieliTree => "yekutieli-tree",
        }
    }

    /// Whether the method applies a user-chosen filter.
    pub fn uses_filter(self) -> bool {
        matches!(self, Method::Fbh | Method::Wfbh | Method::Wrfbh)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::UnknownName {
                kind: "method",
                input: s.to_string(),
            })
    }
}

/// Everything a named method may need besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    pub q: f64,
    pub filter: FilterSpec,
    pub weights: WeightConfig,
    /// Reshaping for `wrfbh`; defaults to BY with the graph size.
    pub reshaping: Option<Reshaping>,
    /// `yekutieli-tree` runs at level `q / yekutieli_divisor`.
    pub yekutieli_divisor: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            q: 0.05,
            filter: FilterSpec::DagStructured,
            weights: WeightConfig::default(),
            reshaping: None,
            yekutieli_divisor: YEKUTIELI_DIVISOR,
        }
    }
}

/// Uniform view over the output of any named method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub method: Method,
    pub discoveries: Vec<usize>,
    pub base_set: Vec<usize>,
    /// Threshold on the weighted p-values; absent for the top-down baseline.
    pub t_star: Option<f64>,
    pub weights: WeightVector,
}

impl From<(Method, ProcedureResult)> for Outcome {
    fn from((method, r): (Method, ProcedureResult)) -> Self {
        Self {
            method,
            discoveries: r.discovery_set,
            base_set: r.base_set,
            t_star: Some(r.t_star),
            weights: r.weights,
        }
    }
}

/// Runs `method` on `pvec` over the hierarchy `h`.
pub fn run_method(
    method: Method,
    h: &Hierarchy,
    pvec: &PValues,
    params: &MethodParams,
) -> Result<Outcome> {
    let m = h.len();
    check_len(m, pvec.len())?;
    let dag = &h.dag;
    let filter = if method.uses_filter() {
        params.filter
    } else {
        FilterSpec::Trivial
    };
    match method {
        Method::Bh | Method::StoreyBh => {
            let (rejected, w) = if method == Method::Bh {
                (bh(pvec, params.q)?, 1.0)
            } else {
                let pi0 = storey_pi0(pvec, params.weights.lambda)?;
                (storey_bh(pvec, params.q, params.weights.lambda)?, pi0)
            };
            let t_star = rejected.iter().map(|&i| w * pvec[i]).fold(0.0, f64::max);
            Ok(Outcome {
                method,
                discoveries: rejected.clone(),
                base_set: rejected,
                t_star: Some(t_star),
                weights: WeightVector::from_values(vec![w; m])?,
            })
        }
        Method::By => {
            let r = weighted_reshaped_fbh(
                dag,
                pvec,
                &WeightVector::unity(m),
                filter,
                params.q,
                &Reshaping::BenjaminiYekutieli(m),
            )?;
            Ok((method, r).into())
        }
        Method::Fbh => Ok((method, fbh(dag, pvec, filter, params.q)?).into()),
        Method::Wfbh => {
            let w = dag_weights(h, pvec, &params.weights)?;
            Ok((method, wfbh(dag, pvec, &w, filter, params.q)?).into())
        }
        Method::Wrfbh => {
            let w = dag_weights(h, pvec, &params.weights)?;
            let beta = params
                .reshaping
                .clone()
                .unwrap_or(Reshaping::BenjaminiYekutieli(m));
            Ok((
                method,
                weighted_reshaped_fbh(dag, pvec, &w, filter, params.q, &beta)?,
            )
                .into())
        }
        Method::YekutieliTree => {
            check_q(params.q)?;
            let level = params.q / params.yekutieli_divisor;
            let rejected = yekutieli_tree(dag, pvec, level)?;
            Ok(Outcome {
                method,
                discoveries: rejected.clone(),
                base_set: rejected,
                t_star: None,
                weights: WeightVector::unity(m),
            })
        }
    }
}
