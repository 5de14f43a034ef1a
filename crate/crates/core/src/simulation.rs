//! Graph generators, truth assignment, p-value sampling and the replication
//! harness, plus Monte Carlo checks of the weight condition and of smoothed
//! p-value validity.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, stream)`;
//! replication `r` uses stream `r + 1`, so results do not depend on how
//! replications are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::combine::special::normal_sf;
use crate::combine::{smooth_all_descendants, Combiner, PValues};
use crate::dag::{Dag, DepthIndex, Hierarchy, NodeSet};
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::procedures::{run_method, Method, MethodParams};
use crate::weights::{DagWeigher, DwMode, WeightConfig};

/// Deterministic generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub enum GraphFamily {
    /// 50 roots, each with 10 leaf children.
    WideTree,
    /// 200 roots and 350 leaves; each root has 10 distinct random leaf
    /// children.
    Bipartite1,
    /// 5 roots, 10 children each, 10 grandchildren each.
    DeepTree,
    /// 61 roots and 490 leaves; 370 leaves have one parent, 120 have two.
    Bipartite2,
    Custom(Dag),
}

impl GraphFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GraphFamily::WideTree => "wide-tree",
            GraphFamily::Bipartite1 => "bipartite1",
            GraphFamily::DeepTree => "deep-tree",
            GraphFamily::Bipartite2 => "bipartite2",
            GraphFamily::Custom(_) => "custom",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, GraphFamily::Bipartite1 | GraphFamily::Bipartite2)
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "wide-tree" => Ok(GraphFamily::WideTree),
            "bipartite1" => Ok(GraphFamily::Bipartite1),
            "deep-tree" => Ok(GraphFamily::DeepTree),
            "bipartite2" => Ok(GraphFamily::Bipartite2),
            _ => Err(Error::UnknownName {
                kind: "graph family",
                input: s.to_string(),
            }),
        }
    }
}

/// Builds a graph of the given family. Node ids run depth by depth.
pub fn generate_graph(family: &GraphFamily, rng: &mut impl Rng) -> Dag {
    let edges = match family {
        GraphFamily::Custom(dag) => return dag.clone(),
        GraphFamily::WideTree => complete_tree(&[50, 10]),
        GraphFamily::DeepTree => complete_tree(&[5, 10, 10]),
        GraphFamily::Bipartite1 => bipartite1_edges(rng),
        GraphFamily::Bipartite2 => bipartite2_edges(rng),
    };
    let m = match family {
        GraphFamily::WideTree | GraphFamily::Bipartite1 => 550,
        GraphFamily::DeepTree => 555,
        _ => 551,
    };
    Dag::new(m, &edges).expect("generated graphs are acyclic")
}

fn complete_tree(fanout: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut level: Vec<usize> = (0..fanout[0]).collect();
    let mut next_id = fanout[0];
    for &k in &fanout[1..] {
        let mut next = Vec::with_capacity(level.len() * k);
        for &parent in &level {
            for _ in 0..k {
                edges.push((parent, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        level = next;
    }
    edges
}

fn bipartite1_edges(rng: &mut impl Rng) -> Vec<(usize, usize)> {
    const ROOTS: usize = 200;
    const LEAVES: usize = 350;
    loop {
        let mut covered = vec![false; LEAVES];
        let mut edges = Vec::with_capacity(ROOTS * 10);
        for root in 0..ROOTS {
            for leaf in index::sample(rng, LEAVES, 10) {
                covered[leaf] = true;
                edges.push((root, ROOTS + leaf));
            }
        }
        if covered.iter().all(|&c| c) {
            return edges;
        }
    }
}

fn bipartite2_edges(rng: &mut impl Rng) -> Vec<(usize, usize)> {
    const ROOTS: usize = 61;
    const LEAVES: usize = 490;
    let mut pool: Vec<usize> = (0..LEAVES).collect();
    pool.extend(index::sample(rng, LEAVES, 120));
    loop {
        pool.shuffle(rng);
        let distinct = pool.chunks(10).all(|deal| {
            let mut d = deal.to_vec();
            d.sort_unstable();
            d.windows(2).all(|w| w[0] != w[1])
        });
        if distinct {
            return pool
                .chunks(10)
                .enumerate()
                .flat_map(|(root, deal)| deal.iter().map(move |&leaf| (root, ROOTS + leaf)))
                .collect();
        }
    }
}

/// Marks `round(p · #leaves)` random leaves non-null (ties to even), then
/// every node with a non-null child.
pub fn assign_truth(dag: &Dag, p_nonnull: f64, rng: &mut impl Rng) -> Result<NodeSet> {
    if !(p_nonnull > 0.0 && p_nonnull < 1.0) {
        return Err(Error::DomainError {
            what: "p_nonnull",
            value: p_nonnull,
        });
    }
    let leaves = dag.leaves();
    let n = (p_nonnull * leaves.len() as f64).round_ties_even() as usize;
    let mut truth = NodeSet::with_capacity(dag.len());
    for k in index::sample(rng, leaves.len(), n) {
        truth.insert(leaves[k]);
    }
    for &v in dag.topological_order().iter().rev() {
        if dag.children(v).iter().any(|&c| truth.contains(c)) {
            truth.insert(v);
        }
    }
    Ok(truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignalSetup {
    /// `μ = 2`.
    Global,
    /// `μ = 2 + 1.5 (d - 1)`.
    Decremental,
    /// `μ = 2 + 1.5 (D - d)`.
    Incremental,
}

impl SignalSetup {
    pub fn name(self) -> &'static str {
        match self {
            SignalSetup::Global => "global",
            SignalSetup::Decremental => "decremental",
            SignalSetup::Incremental => "incremental",
        }
    }

    /// Mean of a non-null statistic at depth `d` of a graph with depth `max_depth`.
    pub fn mu(self, d: usize, max_depth: usize) -> f64 {
        match self {
            SignalSetup::Global => 2.0,
            SignalSetup::Decremental => 2.0 + 1.5 * (d as f64 - 1.0),
            SignalSetup::Incremental => 2.0 + 1.5 * (max_depth as f64 - d as f64),
        }
    }
}

impl fmt::Display for SignalSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalSetup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "global" => Ok(SignalSetup::Global),
            "decremental" => Ok(SignalSetup::Decremental),
            "incremental" => Ok(SignalSetup::Incremental),
            _ => Err(Error::UnknownName {
                kind: "signal setup",
                input: s.to_string(),
            }),
        }
    }
}

/// Draws `X = μ + (1 - ρ) Z + ρ Z₀` for every node and returns `p = 1 - Φ(X)`.
/// `Z₀` is drawn first, then `Z` in node order.
pub fn sample_pvalues(
    depths: &DepthIndex,
    truth: &NodeSet,
    setup: SignalSetup,
    rho: f64,
    rng: &mut impl Rng,
) -> Result<PValues> {
    let x = sample_statistics(depths, truth, setup, rho, rng)?;
    PValues::new(x.into_iter().map(normal_sf).collect())
}

/// The statistics `X` behind [`sample_pvalues`].
pub fn sample_statistics(
    depths: &DepthIndex,
    truth: &NodeSet,
    setup: SignalSetup,
    rho: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::RhoOutOfRange(rho));
    }
    let max_depth = depths.max_depth();
    let z0: f64 = rng.sample(StandardNormal);
    Ok(depths
        .depths()
        .iter()
        .enumerate()
        .map(|(v, &d)| {
            let z: f64 = rng.sample(StandardNormal);
            let mu = if truth.contains(v) {
                setup.mu(d, max_depth)
            } else {
                0.0
            };
            mu + (1.0 - rho) * z + rho * z0
        })
        .collect())
}

/// A method, its filter and optional smoothing, written
/// `method[:filter][@combiner]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub filter: FilterSpec,
    pub smoothing: Option<Combiner>,
}

impl MethodSpec {
    pub fn new(method: Method, filter: FilterSpec) -> Self {
        Self {
            method,
            filter,
            smoothing: None,
        }
    }

    pub fn smoothed(mut self, combiner: Combiner) -> Self {
        self.smoothing = Some(combiner);
        self
    }

    fn effective_filter(&self) -> FilterSpec {
        if self.method.uses_filter() {
            self.filter
        } else {
            FilterSpec::Trivial
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.method)?;
        if self.method.uses_filter() {
            write!(f, ":{}", self.filter)?;
        }
        if let Some(c) = self.smoothing {
            write!(f, "@{c}")?;
        }
        Ok(())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, smoothing) = match s.trim().split_once('@') {
            Some((h, c)) => (h, Some(c.parse::<Combiner>()?)),
            None => (s.trim(), None),
        };
        let (method, filter) = match head.split_once(':') {
            Some((m, f)) => (m.parse::<Method>()?, f.parse::<FilterSpec>()?),
            None => (head.parse::<Method>()?, FilterSpec::DagStructured),
        };
        Ok(Self {
            method,
            filter,
            smoothing,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub family: GraphFamily,
    pub setup: SignalSetup,
    /// Grid of leaf non-null proportions; one cell per value.
    pub p_nonnull: Vec<f64>,
    pub rho: f64,
    pub q: f64,
    pub lambda: f64,
    pub c: usize,
    pub dw: DwMode,
    pub n_reps: usize,
    pub seed: u64,
    /// Smoothing applied to methods that do not name their own.
    pub smoothing: Option<Combiner>,
    pub methods: Vec<MethodSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            family: GraphFamily::WideTree,
            setup: SignalSetup::Global,
            p_nonnull: vec![0.1, 0.3, 0.5],
            rho: 0.0,
            q: 0.05,
            lambda: 0.5,
            c: 1,
            dw: DwMode::Auto,
            n_reps: 200,
            seed: 1,
            smoothing: None,
            methods: vec![
                MethodSpec::new(Method::Wfbh, FilterSpec::DagStructured),
                MethodSpec::new(Method::Fbh, FilterSpec::DagStructured),
            ],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_nonnull.is_empty() {
            return Err(Error::InvalidConfig("empty p_nonnull grid".into()));
        }
        for &p in &self.p_nonnull {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::DomainError {
                    what: "p_nonnull",
                    value: p,
                });
            }
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::RhoOutOfRange(self.rho));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::QOutOfRange(self.q));
        }
        self.weight_config().validate()?;
        if self.n_reps == 0 {
            return Err(Error::InvalidConfig("n_reps must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods".into()));
        }
        Ok(())
    }

    pub fn weight_config(&self) -> WeightConfig {
        WeightConfig {
            lambda: self.lambda,
            c: self.c,
            dw: self.dw.clone(),
        }
    }

    fn smoothing_of(&self, spec: &MethodSpec) -> Option<Combiner> {
        spec.smoothing.or(self.smoothing)
    }
}

/// False discovery proportion and power of one method on one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepOutcome {
    pub fdp: f64,
    pub power: f64,
}

/// Per-replication outcomes of one method in one `p_nonnull` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTrace {
    pub p_nonnull: f64,
    pub method: MethodSpec,
    pub reps: Vec<RepOutcome>,
}

impl CellTrace {
    pub fn fdp(&self) -> Vec<f64> {
        self.reps.iter().map(|r| r.fdp).collect()
    }

    pub fn power(&self) -> Vec<f64> {
        self.reps.iter().map(|r| r.power).collect()
    }
}

/// Sample mean and its standard error `sd / √n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
}

pub fn mean_se(xs: &[f64]) -> McEstimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return McEstimate {
            estimate: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let se = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    McEstimate { estimate: mean, se }
}

/// Mean and standard error of `a_r - b_r` over paired replications.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<McEstimate> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(mean_se(&diff))
}

/// One output row per `(method, p_nonnull)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub family: String,
    pub setup: String,
    pub method: String,
    pub filter: String,
    pub smoothing: String,
    pub p_nonnull: f64,
    pub rho: f64,
    pub q: f64,
    pub lambda: f64,
    pub fdr_hat: f64,
    pub se_fdr: f64,
    pub power_allnonnull: f64,
    pub se_power: f64,
    pub n_reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub rows: Vec<SimRow>,
    pub traces: Vec<CellTrace>,
}

/// Runs every replication of every cell. Traces are ordered by cell, then
/// method, then replication.
pub fn run_replications(config: &SimConfig) -> Result<Vec<CellTrace>> {
    config.validate()?;
    let mut traces = Vec::new();
    for &p in &config.p_nonnull {
        let per_rep: Vec<Vec<RepOutcome>> = (0..config.n_reps)
            .into_par_iter()
            .map(|r| replicate(config, p, r as u64))
            .collect::<Result<_>>()?;
        for (k, spec) in config.methods.iter().enumerate() {
            traces.push(CellTrace {
                p_nonnull: p,
                method: *spec,
                reps: per_rep.iter().map(|rep| rep[k]).collect(),
            });
        }
    }
    Ok(traces)
}

fn replicate(config: &SimConfig, p_nonnull: f64, rep: u64) -> Result<Vec<RepOutcome>> {
    let mut rng = stream_rng(config.seed, rep + 1);
    let h = Hierarchy::new(generate_graph(&config.family, &mut rng));
    let truth = assign_truth(&h.dag, p_nonnull, &mut rng)?;
    assert!(h.dag.check_heredity(&truth), "truth violates heredity");
    let raw = sample_pvalues(&h.depths, &truth, config.setup, config.rho, &mut rng)?;

    let mut smoothed: Vec<(Combiner, PValues)> = Vec::new();
    let n_nonnull = truth.count_ones(..);
    let mut out = Vec::with_capacity(config.methods.len());
    for spec in &config.methods {
        let pvec = match config.smoothing_of(spec) {
            None => &raw,
            Some(c) => {
                let pos = match smoothed.iter().position(|(k, _)| *k == c) {
                    Some(pos) => pos,
                    None => {
                        smoothed.push((c, smooth_all_descendants(&h.dag, &raw, c)?));
                        smoothed.len() - 1
                    }
                };
                &smoothed[pos].1
            }
        };
        let params = MethodParams {
            q: config.q,
            filter: spec.effective_filter(),
            weights: config.weight_config(),
            ..MethodParams::default()
        };
        let outcome = run_method(spec.method, &h, pvec, &params)?;
        let true_hits = outcome
            .discoveries
            .iter()
            .filter(|&&i| truth.contains(i))
            .count();
        let false_hits = outcome.discoveries.len() - true_hits;
        out.push(RepOutcome {
            fdp: false_hits as f64 / outcome.discoveries.len().max(1) as f64,
            power: true_hits as f64 / n_nonnull.max(1) as f64,
        });
    }
    Ok(out)
}

/// Runs the simulation and aggregates each cell.
pub fn run_simulation(config: &SimConfig) -> Result<SimSummary> {
    let traces = run_replications(config)?;
    let rows = traces
        .iter()
        .map(|t| {
            let fdr = mean_se(&t.fdp());
            let power = mean_se(&t.power());
            SimRow {
                family: config.family.name().to_string(),
                setup: config.setup.name().to_string(),
                method: t.method.method.name().to_string(),
                filter: t.method.effective_filter().to_string(),
                smoothing: config
                    .smoothing_of(&t.method)
                    .map_or_else(|| "none".to_string(), |c| c.to_string()),
                p_nonnull: t.p_nonnull,
                rho: config.rho,
                q: config.q,
                lambda: config.lambda,
                fdr_hat: fdr.estimate,
                se_fdr: fdr.se,
                power_allnonnull: power.estimate,
                se_power: power.se,
                n_reps: t.reps.len(),
                seed: config.seed,
            }
        })
        .collect();
    Ok(SimSummary { rows, traces })
}

/// Monte Carlo estimate of `Σ_{i ∈ H₀} E[1 / ŵ_i(p_{0,i})]`, where
/// `p_{0,i}` is `p` with entry `i` set to 0. Non-null p-values follow `setup`
/// with independent noise.
pub fn condition1_check(
    h: &Hierarchy,
    config: &WeightConfig,
    truth: &NodeSet,
    setup: SignalSetup,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    let weigher = DagWeigher::new(h, config)?;
    let nulls: Vec<usize> = (0..h.len()).filter(|&i| !truth.contains(i)).collect();
    let sums: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64 + 1);
            let p = sample_pvalues(&h.depths, truth, setup, 0.0, &mut rng)?;
            let above = weigher.exceedances(&p);
            Ok(nulls
                .iter()
                .map(|&i| weigher.inverse_weight_zeroed(&p, &above, i))
                .sum())
        })
        .collect::<Result<_>>()?;
    Ok(mean_se(&sums))
}

pub const UNIFORMITY_GRID: [f64; 5] = [0.01, 0.05, 0.1, 0.25, 0.5];

/// How null uniforms are drawn across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullSampling {
    Independent,
    /// Each node's `n` uniforms form a Latin hypercube sample: one draw in each
    /// interval `[k/n, (k+1)/n)`, in an independent random order per node.
    /// Within a replication the nodes stay independent and uniform.
    Stratified,
}

/// Empirical CDF of one node's smoothed p-value on [`UNIFORMITY_GRID`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityRow {
    pub node: usize,
    pub f_hat: [f64; 5],
    pub se: [f64; 5],
}

impl UniformityRow {
    /// Whether `F̂(t) <= t + k·se` at every grid point.
    pub fn valid(&self, k: f64) -> bool {
        (0..UNIFORMITY_GRID.len()).all(|j| self.f_hat[j] <= UNIFORMITY_GRID[j] + k * self.se[j])
    }
}

/// Empirical CDFs of all-descendant smoothed p-values under the full null.
/// The standard error is the binomial `sqrt(F̂ (1 - F̂) / n)`.
pub fn superuniformity_check(
    dag: &Dag,
    combiner: Combiner,
    n_mc: usize,
    seed: u64,
    sampling: NullSampling,
) -> Result<Vec<UniformityRow>> {
    let m = dag.len();
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be positive".into()));
    }
    let columns: Option<Vec<Vec<f64>>> = match sampling {
        NullSampling::Independent => None,
        NullSampling::Stratified => Some(
            (0..m)
                .into_par_iter()
                .map(|v| {
                    let mut rng = stream_rng(seed, (1u64 << 32) + v as u64);
                    let mut strata: Vec<usize> = (0..n_mc).collect();
                    strata.shuffle(&mut rng);
                    strata
                        .into_iter()
                        .map(|k| (k as f64 + rng.random::<f64>()) / n_mc as f64)
                        .collect()
                })
                .collect(),
        ),
    };

    let counts = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let raw: Vec<f64> = match &columns {
                Some(cols) => cols.iter().map(|c| c[r]).collect(),
                None => {
                    let mut rng = stream_rng(seed, r as u64 + 1);
                    (0..m).map(|_| rng.random::<f64>()).collect()
                }
            };
            let smoothed = smooth_all_descendants(dag, &PValues::new(raw)?, combiner)?;
            let mut hits = vec![[0u32; 5]; m];
            for (v, &p) in smoothed.iter().enumerate() {
                for (j, &t) in UNIFORMITY_GRID.iter().enumerate() {
                    if p <= t {
                        hits[v][j] += 1;
                    }
                }
            }
            Ok(hits)
        })
        .try_reduce(
            || vec![[0u32; 5]; m],
            |mut acc, hits| {
                for (a, h) in acc.iter_mut().zip(&hits) {
                    for j in 0..5 {
                        a[j] += h[j];
                    }
                }
                Ok(acc)
            },
        )?;

    let n = n_mc as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(node, c)| {
            let f_hat = c.map(|k| k as f64 / n);
            let se = f_hat.map(|f| (f * (1.0 - f) / n).sqrt());
            UniformityRow { node, f_hat, se }
        })
        .collect())
}
