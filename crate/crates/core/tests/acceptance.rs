//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test --release -p focusfdr --test acceptance -- --nocapture`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use focusfdr::checks::{monotone_trial, random_dag, random_tree};
use focusfdr::combine::{Combiner, PValues};
use focusfdr::dag::{node_set, Dag, Hierarchy, NodeSet};
use focusfdr::filters::{apply_filter, FilterSpec};
use focusfdr::procedures::{weighted_reshaped_fbh, wfbh, Reshaping};
use focusfdr::simulation::{
    condition1_check, generate_graph, paired_difference, run_replications, run_simulation,
    stream_rng, superuniformity_check, GraphFamily, MethodSpec, NullSampling, SignalSetup,
    SimConfig, UNIFORMITY_GRID,
};
use focusfdr::weights::{dag_weights, DwMode, WeightConfig, WeightVector};
use rand::Rng;

const SEED: u64 = 20_240_601;

fn report(id: u32, name: &str, ok: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    println!(
        "{verdict} criterion {id:>2} {name}: {detail} [{:.2}s of {:.0}s]",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its time budget");
}

fn oracle_bh(p: &[f64], q: f64) -> BTreeSet<usize> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    let mut k = 0;
    for (rank, &i) in idx.iter().enumerate() {
        if p[i] <= (rank + 1) as f64 * q / m as f64 {
            k = rank + 1;
        }
    }
    idx[..k].iter().copied().collect()
}

#[test]
fn criterion_01_bh_equivalence() {
    let start = Instant::now();
    let mut rng = stream_rng(SEED, 1);
    let trials = 1000;
    let mut same = 0;
    for _ in 0..trials {
        let m = rng.random_range(1..=50);
        let dag = random_dag(&mut rng, m, 0.1);
        let p: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let q = rng.random_range(0.01..0.5);
        let pvec = PValues::new(p.clone()).unwrap();
        let r = wfbh(&dag, &pvec, &WeightVector::unity(m), FilterSpec::Trivial, q).unwrap();
        let got: BTreeSet<usize> = r.discovery_set.into_iter().collect();
        if got == oracle_bh(&p, q) {
            same += 1;
        }
    }
    report(
        1,
        "wfbh(unity, trivial) = bh",
        same == trials,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("{same}/{trials} set-identical"),
    );
}

/// Ancestor and descendant sets from the raw edge list by fixed-point
/// iteration.
fn closures(m: usize, edges: &[(usize, usize)]) -> (Vec<BTreeSet<usize>>, Vec<BTreeSet<usize>>) {
    let mut anc: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            let mut add: BTreeSet<usize> = anc[a].clone();
            add.insert(a);
            for x in add {
                changed |= anc[b].insert(x);
            }
        }
        if !changed {
            break;
        }
    }
    let mut desc = vec![BTreeSet::new(); m];
    for (v, a) in anc.iter().enumerate() {
        for &u in a {
            desc[u].insert(v);
        }
    }
    (anc, desc)
}

fn oracle_filter(
    filter: FilterSpec,
    anc: &[BTreeSet<usize>],
    desc: &[BTreeSet<usize>],
    r: &BTreeSet<usize>,
    p: &[f64],
) -> usize {
    r.iter()
        .filter(|&&j| match filter {
            FilterSpec::Trivial => true,
            FilterSpec::DagStructured => anc[j].is_subset(r),
            FilterSpec::OuterNodes => desc[j].is_disjoint(r),
            FilterSpec::Screening(s) => p[j] <= s,
        })
        .count()
}

fn oracle_tstar(
    m: usize,
    edges: &[(usize, usize)],
    p: &[f64],
    w: &[f64],
    filter: FilterSpec,
    q: f64,
) -> f64 {
    let (anc, desc) = closures(m, edges);
    let wp: Vec<f64> = (0..m).map(|i| w[i] * p[i]).collect();
    let mut candidates = vec![0.0];
    candidates.extend(wp.iter().copied());
    let mut best = 0.0;
    for t in candidates {
        let r: BTreeSet<usize> = (0..m).filter(|&i| wp[i] <= t).collect();
        let size = oracle_filter(filter, &anc, &desc, &r, p);
        let fdp = if t == 0.0 {
            0.0
        } else if size == 0 {
            f64::INFINITY
        } else {
            m as f64 * t / size as f64
        };
        if fdp <= q && t > best {
            best = t;
        }
    }
    best
}

fn random_instance(rng: &mut impl Rng) -> (Hierarchy, Vec<(usize, usize)>, PValues) {
    let m = rng.random_range(1..=30);
    let density = rng.random_range(0.0..0.4);
    let dag = random_dag(rng, m, density);
    let edges: Vec<(usize, usize)> = dag.edges().collect();
    let coarse = rng.random_bool(0.3);
    let p: Vec<f64> = (0..m)
        .map(|_| {
            let x: f64 = rng.random();
            if coarse {
                (x * 50.0).round() / 50.0
            } else {
                x
            }
        })
        .collect();
    (Hierarchy::new(dag), edges, PValues::new(p).unwrap())
}

fn random_weights_for(rng: &mut impl Rng, h: &Hierarchy, p: &PValues) -> WeightVector {
    if rng.random_bool(0.5) {
        let config = WeightConfig {
            lambda: rng.random_range(0.1..0.9),
            c: rng.random_range(0..3),
            dw: DwMode::Auto,
        };
        dag_weights(h, p, &config).unwrap()
    } else {
        WeightVector::from_values((0..h.len()).map(|_| rng.random_range(0.2..5.0)).collect())
            .unwrap()
    }
}

fn random_filter_for(rng: &mut impl Rng) -> FilterSpec {
    match rng.random_range(0..4) {
        0 => FilterSpec::Trivial,
        1 => FilterSpec::DagStructured,
        2 => FilterSpec::OuterNodes,
        _ => FilterSpec::Screening(rng.random_range(0.05..1.0)),
    }
}

#[test]
fn criterion_02_tstar_oracle() {
    let start = Instant::now();
    let mut rng = stream_rng(SEED, 2);
    let trials = 1000;
    let mut matches = 0;
    let mut nonzero = 0;
    for _ in 0..trials {
        let (h, edges, p) = random_instance(&mut rng);
        let w = random_weights_for(&mut rng, &h, &p);
        let filter = random_filter_for(&mut rng);
        let q = rng.random_range(0.01..0.5);
        let fast = wfbh(&h.dag, &p, &w, filter, q).unwrap().t_star;
        let slow = oracle_tstar(h.len(), &edges, &p, w.values(), filter, q);
        if fast == slow {
            matches += 1;
        }
        if slow > 0.0 {
            nonzero += 1;
        }
    }
    report(
        2,
        "optimized t* = brute-force t*",
        matches == trials,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("{matches}/{trials} exact ({nonzero} with t* > 0)"),
    );
}

fn wide_tree_config(setup: SignalSetup, methods: &[&str]) -> SimConfig {
    SimConfig {
        family: GraphFamily::WideTree,
        setup,
        p_nonnull: vec![0.1, 0.3, 0.5],
        rho: 0.0,
        q: 0.05,
        lambda: 0.5,
        c: 1,
        dw: DwMode::Auto,
        n_reps: 200,
        seed: SEED,
        smoothing: None,
        methods: methods
            .iter()
            .map(|s| s.parse::<MethodSpec>().unwrap())
            .collect(),
    }
}

#[test]
fn criterion_03_fdr_control() {
    let start = Instant::now();
    let config = wide_tree_config(SignalSetup::Global, &["wfbh:ds", "fbh:ds"]);
    let summary = run_simulation(&config).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for row in &summary.rows {
        let pass = row.fdr_hat <= config.q + 2.0 * row.se_fdr;
        ok &= pass;
        cells.push(format!(
            "{}@{}: {:.4}±{:.4}",
            row.method, row.p_nonnull, row.fdr_hat, row.se_fdr
        ));
    }
    report(
        3,
        "FDR <= q + 2SE, global setup",
        ok,
        start.elapsed(),
        Duration::from_secs(300),
        &cells.join(", "),
    );
}

#[test]
fn criterion_04_power_ordering() {
    let start = Instant::now();
    let config = wide_tree_config(SignalSetup::Decremental, &["wfbh:ds", "fbh:ds"]);
    let traces = run_replications(&config).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for pair in traces.chunks(2) {
        let (w, f) = (&pair[0], &pair[1]);
        let d = paired_difference(&w.power(), &f.power()).unwrap();
        let mut pass = d.estimate >= -2.0 * d.se;
        if w.p_nonnull == 0.3 {
            pass &= d.estimate > 2.0 * d.se;
        }
        ok &= pass;
        cells.push(format!(
            "p={}: diff {:.4}±{:.4}",
            w.p_nonnull, d.estimate, d.se
        ));
    }
    report(
        4,
        "power(WFBH) - power(FBH), decremental",
        ok,
        start.elapsed(),
        Duration::from_secs(300),
        &cells.join(", "),
    );
}

#[test]
fn criterion_05_smoothing_gain() {
    let start = Instant::now();
    let mut config = wide_tree_config(SignalSetup::Decremental, &["fbh:ds@fisher", "fbh:ds"]);
    config.p_nonnull = vec![0.3];
    let traces = run_replications(&config).unwrap();
    let d = paired_difference(&traces[0].power(), &traces[1].power()).unwrap();
    report(
        5,
        "power(FBH, Fisher-smoothed) - power(FBH)",
        d.estimate >= 2.0 * d.se,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("diff {:.4}±{:.4} at p=0.3", d.estimate, d.se),
    );
}

#[test]
fn criterion_06_condition1() {
    let start = Instant::now();
    let h = Hierarchy::new(generate_graph(
        &GraphFamily::WideTree,
        &mut stream_rng(SEED, 0),
    ));
    let truth = NodeSet::with_capacity(h.len());
    let est = condition1_check(
        &h,
        &WeightConfig::default(),
        &truth,
        SignalSetup::Global,
        10_000,
        SEED,
    )
    .unwrap();
    let bound = 550.0 * (1.0 + 3.0 * est.se / est.estimate);
    report(
        6,
        "sum of E[1/w] over nulls <= m",
        est.estimate <= bound,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "estimate {:.3}±{:.3}, bound {:.3}",
            est.estimate, est.se, bound
        ),
    );
}

#[test]
fn criterion_07_smoothed_validity() {
    let start = Instant::now();
    let dag = generate_graph(&GraphFamily::DeepTree, &mut stream_rng(SEED, 0));
    let mut ok = true;
    let mut parts = Vec::new();
    for combiner in [
        Combiner::Simes,
        Combiner::Fisher,
        Combiner::Stouffer,
        Combiner::Bonferroni,
    ] {
        let rows =
            superuniformity_check(&dag, combiner, 10_000, SEED, NullSampling::Stratified).unwrap();
        let mut worst = f64::NEG_INFINITY;
        let mut bad = 0;
        for row in &rows {
            for (j, &t) in UNIFORMITY_GRID.iter().enumerate() {
                let z = if row.se[j] > 0.0 {
                    (row.f_hat[j] - t) / row.se[j]
                } else if row.f_hat[j] <= t {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
                if row.f_hat[j] > t + 3.0 * row.se[j] {
                    bad += 1;
                }
            }
        }
        ok &= bad == 0;
        parts.push(format!("{combiner}: {bad} violations, max z {worst:.2}"));
    }
    report(
        7,
        "smoothed p-values superuniform on the deep tree",
        ok,
        start.elapsed(),
        Duration::from_secs(180),
        &parts.join(", "),
    );
}

#[test]
fn criterion_08_dependence_robustness() {
    let start = Instant::now();
    let mut config = wide_tree_config(SignalSetup::Global, &["wfbh:ds"]);
    config.rho = 0.2;
    config.lambda = config.q;
    let summary = run_simulation(&config).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for row in &summary.rows {
        ok &= row.fdr_hat <= config.q + 2.0 * row.se_fdr;
        cells.push(format!(
            "p={}: {:.4}±{:.4}",
            row.p_nonnull, row.fdr_hat, row.se_fdr
        ));
    }
    report(
        8,
        "WFBH FDR <= q + 2SE with rho = 0.2",
        ok,
        start.elapsed(),
        Duration::from_secs(300),
        &cells.join(", "),
    );
}

/// Whether `|F(R)| <= |F(R')|` for every pair `R ⊆ R'` on `dag`.
fn exhaustively_monotone(dag: &Dag, filter: FilterSpec) -> bool {
    let m = dag.len();
    let p = vec![0.0; m];
    let sets: Vec<NodeSet> = (0u32..(1 << m))
        .map(|s| node_set(m, (0..m).filter(|&v| s & (1 << v) != 0)))
        .collect();
    let sizes: Vec<usize> = sets
        .iter()
        .map(|r| apply_filter(filter, dag, r, &p).unwrap().count_ones(..))
        .collect();
    sets.iter().enumerate().all(|(a, ra)| {
        sets.iter()
            .enumerate()
            .all(|(b, rb)| !ra.is_subset(rb) || sizes[a] <= sizes[b])
    })
}

#[test]
fn criterion_09_filter_facts() {
    let start = Instant::now();
    let mut rng = stream_rng(SEED, 9);
    let trials = 1000;
    let mut ds_ok = 0;
    let mut outer_ok = 0;
    for _ in 0..trials {
        let m = rng.random_range(1..=25);
        let density = rng.random_range(0.0..0.5);
        let dag = random_dag(&mut rng, m, density);
        if monotone_trial(&mut rng, &dag, FilterSpec::DagStructured).unwrap() {
            ds_ok += 1;
        }
        let tree = random_tree(&mut rng, m);
        if monotone_trial(&mut rng, &tree, FilterSpec::OuterNodes).unwrap() {
            outer_ok += 1;
        }
    }
    let pinned = Dag::new(3, &[(0, 2), (1, 2)]).unwrap();
    let p = [0.0; 3];
    let before = apply_filter(FilterSpec::OuterNodes, &pinned, &node_set(3, [0, 1]), &p)
        .unwrap()
        .count_ones(..);
    let after = apply_filter(FilterSpec::OuterNodes, &pinned, &node_set(3, [0, 1, 2]), &p)
        .unwrap()
        .count_ones(..);
    let pinned_fails = before > after && !exhaustively_monotone(&pinned, FilterSpec::OuterNodes);
    report(
        9,
        "filter monotonicity facts",
        ds_ok == trials && outer_ok == trials && pinned_fails,
        start.elapsed(),
        Duration::from_secs(30),
        &format!(
            "ds {ds_ok}/{trials}, outer on trees {outer_ok}/{trials}, \
             pinned two-parent graph |F_out| {before} -> {after}"
        ),
    );
}

#[test]
fn criterion_10_reshaped_conservative() {
    let start = Instant::now();
    let mut rng = stream_rng(SEED, 10);
    let trials = 1000;
    let mut ok = 0;
    let mut strict = 0;
    for _ in 0..trials {
        let (h, _, p) = random_instance(&mut rng);
        let w = random_weights_for(&mut rng, &h, &p);
        let filter = random_filter_for(&mut rng);
        let q = rng.random_range(0.01..0.5);
        let plain = wfbh(&h.dag, &p, &w, filter, q).unwrap().t_star;
        let by = weighted_reshaped_fbh(
            &h.dag,
            &p,
            &w,
            filter,
            q,
            &Reshaping::BenjaminiYekutieli(h.len()),
        )
        .unwrap()
        .t_star;
        if by <= plain {
            ok += 1;
        }
        if by < plain {
            strict += 1;
        }
    }
    report(
        10,
        "t*_BY <= t*",
        ok == trials,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("{ok}/{trials} ({strict} strict)"),
    );
}
