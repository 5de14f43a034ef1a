//! Named property and Monte Carlo suites, with random instance generators.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::combine::{Combiner, PValues};
use crate::dag::{node_set, Dag, Hierarchy, NodeSet};
use crate::error::{Error, Result};
use crate::filters::{apply_filter, FilterSpec};
use crate::procedures::{bh, fbh, weighted_reshaped_fbh, wfbh, Reshaping};
use crate::simulation::{
    condition1_check, generate_graph, stream_rng, superuniformity_check, GraphFamily, NullSampling,
    SignalSetup, UNIFORMITY_GRID,
};
use crate::weights::{dag_weights, DwMode, WeightConfig, WeightVector};

/// Random DAG on `m` nodes: each pair `i < j` is an edge `i → j` with
/// probability `density`.
pub fn random_dag(rng: &mut impl Rng, m: usize, density: f64) -> Dag {
    let mut edges = Vec::new();
    for j in 0..m {
        for i in 0..j {
            if rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    Dag::new(m, &edges).expect("forward edges are acyclic")
}

/// Random forest on `m` nodes: node `j` is a root with probability
/// `1 / (j + 1)`, otherwise a child of a uniform earlier node.
pub fn random_tree(rng: &mut impl Rng, m: usize) -> Dag {
    let edges: Vec<(usize, usize)> = (1..m)
        .filter_map(|j| {
            let k = rng.random_range(0..=j);
            (k < j).then_some((k, j))
        })
        .collect();
    Dag::new(m, &edges).expect("forests are acyclic")
}

/// Uniform p-values, some rounded to two decimals so ties occur.
pub fn random_pvalues(rng: &mut impl Rng, m: usize) -> PValues {
    let coarse = rng.random_bool(0.3);
    let values = (0..m)
        .map(|_| {
            let p: f64 = rng.random();
            if coarse {
                (p * 100.0).round() / 100.0
            } else {
                p
            }
        })
        .collect();
    PValues::new(values).expect("in range")
}

pub fn random_filter(rng: &mut impl Rng) -> FilterSpec {
    match rng.random_range(0..4) {
        0 => FilterSpec::Trivial,
        1 => FilterSpec::DagStructured,
        2 => FilterSpec::OuterNodes,
        _ => FilterSpec::Screening(rng.random_range(0.05..1.0)),
    }
}

/// Either data-adaptive weights or arbitrary positive weights.
pub fn random_weights(rng: &mut impl Rng, h: &Hierarchy, p: &PValues) -> WeightVector {
    if rng.random_bool(0.5) {
        let config = WeightConfig {
            lambda: rng.random_range(0.1..0.9),
            c: rng.random_range(0..3),
            dw: DwMode::Auto,
        };
        dag_weights(h, p, &config).expect("valid config")
    } else {
        let values = (0..h.len()).map(|_| rng.random_range(0.2..5.0)).collect();
        WeightVector::from_values(values).expect("positive")
    }
}

/// Threshold scan over every candidate, with no pruning.
pub fn brute_force_tstar(
    dag: &Dag,
    p: &PValues,
    w: &WeightVector,
    filter: FilterSpec,
    q: f64,
    beta: &Reshaping,
) -> Result<f64> {
    let m = p.len();
    let weighted: Vec<f64> = (0..m).map(|i| w.get(i) * p[i]).collect();
    let mut best = 0.0f64;
    for &t in std::iter::once(&0.0).chain(weighted.iter()) {
        let r = node_set(m, (0..m).filter(|&i| weighted[i] <= t));
        let size = apply_filter(filter, dag, &r, p)?.count_ones(..);
        let b = beta.apply(size);
        let fdp = if t == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            m as f64 * t / b
        };
        if fdp <= q && t > best {
            best = t;
        }
    }
    Ok(best)
}

/// Registered check suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Condition1,
    Superuniformity,
    OracleTstar,
    FilterMonotone,
    OuterMonotoneCounterexample,
    BhEquivalence,
    Reshaped,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Condition1,
        Suite::Superuniformity,
        Suite::OracleTstar,
        Suite::FilterMonotone,
        Suite::OuterMonotoneCounterexample,
        Suite::BhEquivalence,
        Suite::Reshaped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Condition1 => "condition1",
            Suite::Superuniformity => "superuniformity",
            Suite::OracleTstar => "oracle-tstar",
            Suite::FilterMonotone => "filter-monotone",
            Suite::OuterMonotoneCounterexample => "outer-monotone-counterexample",
            Suite::BhEquivalence => "bh-equivalence",
            Suite::Reshaped => "reshaped",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::UnknownName {
                kind: "check suite",
                input: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub suite: Suite,
    pub passed: bool,
    /// Numeric evidence, one line per item.
    pub evidence: Vec<String>,
}

/// Runs `suite` with `trials` random instances or Monte Carlo replications.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<CheckReport> {
    let (passed, evidence) = match suite {
        Suite::Condition1 => condition1_suite(trials, seed)?,
        Suite::Superuniformity => superuniformity_suite(trials, seed)?,
        Suite::OracleTstar => oracle_suite(trials, seed)?,
        Suite::FilterMonotone => monotone_suite(trials, seed)?,
        Suite::OuterMonotoneCounterexample => match find_outer_counterexample() {
            Some(cx) => (true, vec![cx.to_string()]),
            None => (
                false,
                vec!["no counterexample on graphs up to 4 nodes".into()],
            ),
        },
        Suite::BhEquivalence => bh_suite(trials, seed)?,
        Suite::Reshaped => reshaped_suite(trials, seed)?,
    };
    Ok(CheckReport {
        suite,
        passed,
        evidence,
    })
}

fn condition1_suite(n_mc: usize, seed: u64) -> Result<(bool, Vec<String>)> {
    let h = Hierarchy::new(generate_graph(
        &GraphFamily::WideTree,
        &mut stream_rng(seed, 0),
    ));
    let truth = NodeSet::with_capacity(h.len());
    let est = condition1_check(
        &h,
        &WeightConfig::default(),
        &truth,
        SignalSetup::Global,
        n_mc,
        seed,
    )?;
    let m = h.len() as f64;
    let rel = est.se / est.estimate;
    let bound = m * (1.0 + 3.0 * rel);
    Ok((
        est.estimate <= bound,
        vec![format!(
            "estimate {:.4} se {:.4} bound {:.4} (m = {})",
            est.estimate, est.se, bound, m
        )],
    ))
}

fn superuniformity_suite(n_mc: usize, seed: u64) -> Result<(bool, Vec<String>)> {
    let dag = generate_graph(&GraphFamily::DeepTree, &mut stream_rng(seed, 0));
    let mut passed = true;
    let mut evidence = Vec::new();
    for combiner in [
        Combiner::Simes,
        Combiner::Fisher,
        Combiner::Stouffer,
        Combiner::Bonferroni,
    ] {
        let rows = superuniformity_check(&dag, combiner, n_mc, seed, NullSampling::Stratified)?;
        let bad: Vec<usize> = rows
            .iter()
            .filter(|r| !r.valid(3.0))
            .map(|r| r.node)
            .collect();
        let root = &rows[0];
        let cdf: Vec<String> = UNIFORMITY_GRID
            .iter()
            .zip(root.f_hat)
            .map(|(t, f)| format!("F({t})={f:.4}"))
            .collect();
        evidence.push(format!(
            "{combiner}: {} of {} nodes valid; root {}",
            rows.len() - bad.len(),
            rows.len(),
            cdf.join(" ")
        ));
        passed &= bad.is_empty();
    }
    Ok((passed, evidence))
}

fn oracle_suite(trials: usize, seed: u64) -> Result<(bool, Vec<String>)> {
    let mut rng = stream_rng(seed, 0);
    let mut matches = 0;
    for _ in 0..trials {
        let m = rng.random_range(1..=30);
        let density = rng.random_range(0.0..0.4);
        let h = Hierarchy::new(random_dag(&mut rng, m, density));
        let p = random_pvalues(&mut rng, m);
        let w = random_weights(&mut rng, &h, &p);
        let filter = random_filter(&mut rng);
        let q = rng.random_range(0.01..0.5);
        let fast = wfbh(&h.dag, &p, &w, filter, q)?.t_star;
        let slow = brute_force_tstar(&h.dag, &p, &w, filter, q, &Reshaping::Identity)?;
        if fast == slow {
            matches += 1;
        }
    }
    Ok((
        matches == trials,
        vec![format!("{matches}/{trials} exact matches")],
    ))
}

/// Whether `|F(R, p)| <= |F(R', p')|` for random `R ⊆ R'`, `p' <= p`.
pub fn monotone_trial(rng: &mut impl Rng, dag: &Dag, filter: FilterSpec) -> Result<bool> {
    let m = dag.len();
    let p = random_pvalues(rng, m);
    let shrunk = PValues::new(p.iter().map(|&x| x * rng.random::<f64>()).collect())?;
    let small = node_set(m, (0..m).filter(|_| rng.random_bool(0.4)));
    let mut large = small.clone();
    for v in 0..m {
        if rng.random_bool(0.3) {
            large.insert(v);
        }
    }
    let a = apply_filter(filter, dag, &small, &p)?.count_ones(..);
    let b = apply_filter(filter, dag, &large, &shrunk)?.count_ones(..);
    Ok(a <= b)
}

fn monotone_suite(trials: usize, seed: u64) -> Result<(bool, Vec<String>)> {
    let mut rng = stream_rng(seed, 0);
    let mut evidence = Vec::new();
    let mut passed = true;
    for (label, filter, trees) in [
        ("ds on DAGs", FilterSpec::DagStructured, false),
        ("outer on trees", FilterSpec::OuterNodes, true),
        ("trivial on DAGs", FilterSpec::Trivial, false),
        ("screen:0.2 on DAGs", FilterSpec::Screening(0.2), false),
    ] {
        let mut ok = 0;
        for _ in 0..trials {
            let m = rng.random_range(1..=25);
            let density = rng.random_range(0.0..0.5);
            let dag = if trees {
                random_tree(&mut rng, m)
            } else {
                random_dag(&mut rng, m, density)
            };
            if monotone_trial(&mut rng, &dag, filter)? {
                ok += 1;
            }
        }
        evidence.push(format!("{label}: {ok}/{trials} monotone"));
        passed &= ok == trials;
    }
    Ok((passed, evidence))
}

/// A DAG and nested rejection sets `R ⊂ R'` with `|F_out(R)| > |F_out(R')|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OuterCounterexample {
    pub m: usize,
    pub edges: Vec<(usize, usize)>,
    pub smaller: Vec<usize>,
    pub larger: Vec<usize>,
    pub kept_smaller: usize,
    pub kept_larger: usize,
}

impl fmt::Display for OuterCounterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m = {}, edges {:?}: |F_out({:?})| = {} > |F_out({:?})| = {}",
            self.m, self.edges, self.smaller, self.kept_smaller, self.larger, self.kept_larger
        )
    }
}

/// Exhaustive search over forward-edge DAGs with at most 4 nodes, in
/// increasing order of node count, edge mask and rejection sets.
pub fn find_outer_counterexample() -> Option<OuterCounterexample> {
    for m in 1..=4usize {
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &e)| e)
                .collect();
            let dag = Dag::new(m, &edges).ok()?;
            let p = vec![0.0; m];
            let sets: Vec<NodeSet> = (0u32..(1 << m))
                .map(|s| node_set(m, (0..m).filter(|&v| s & (1 << v) != 0)))
                .collect();
            let kept: Vec<usize> = sets
                .iter()
                .map(|r| {
                    apply_filter(FilterSpec::OuterNodes, &dag, r, &p)
                        .expect("in range")
                        .count_ones(..)
                })
                .collect();
            for (a, small) in sets.iter().enumerate() {
                for (b, large) in sets.iter().enumerate() {
                    if a != b && small.is_subset(large) && kept[a] > kept[b] {
                        return Some(OuterCounterexample {
                            m,
                            edges,
                            smaller: small.ones().collect(),
                            larger: large.ones().collect(),
                            kept_smaller: kept[a],
                            kept_larger: kept[b],
                        });
                    }
                }
            }
        }
    }
    None
}

fn bh_suite(trials: usize, seed: u64) -> Result<(bool, Vec<String>)> {
    let mut rng = stream_rng(seed, 0);
    let mut same = 0;
    for _ in 0..trials {
        let m = rng.random_range(1..=50);
        let dag = random_dag(&mut rng, m, 0.1);
        let p = random_pvalues(&mut rng, m);
        let q = rng.random_range(0.01..0.5);
        if fbh(&dag, &p, FilterSpec::Trivial, q)?.discovery_set == bh(&p, q)? {
            same += 1;
        }
    }
    Ok((same == trials, vec![format!("{same}/{trials} identical")]))
}

fn reshaped_suite(trials: usize, seed: u64) -> Result<(bool, Vec<String>)> {
    let mut rng = stream_rng(seed, 0);
    let mut ok = 0;
    for _ in 0..trials {
        let m = rng.random_range(1..=30);
        let density = rng.random_range(0.0..0.4);
        let h = Hierarchy::new(random_dag(&mut rng, m, density));
        let p = random_pvalues(&mut rng, m);
        let w = random_weights(&mut rng, &h, &p);
        let filter = random_filter(&mut rng);
        let q = rng.random_range(0.01..0.5);
        let plain = wfbh(&h.dag, &p, &w, filter, q)?.t_star;
        let by =
            weighted_reshaped_fbh(&h.dag, &p, &w, filter, q, &Reshaping::BenjaminiYekutieli(m))?
                .t_star;
        if by <= plain {
            ok += 1;
        }
    }
    Ok((
        ok == trials,
        vec![format!("{ok}/{trials} with t*_BY <= t*")],
    ))
}
