use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use focusfdr::checks::{run_suite, Suite};
use focusfdr::combine::intersection_dag_pvalues;
use focusfdr::procedures::YEKUTIELI_DIVISOR;
use focusfdr::simulation::{
    generate_graph, run_simulation, stream_rng, GraphFamily, MethodSpec, SignalSetup, SimConfig,
};
use focusfdr::{
    run_method, smooth_all_descendants, Combiner, DwMode, FilterSpec, Hierarchy, Method,
    MethodParams, Reshaping, WeightConfig,
};
use serde::Deserialize;

use crate::io::{read_dag, read_items, read_pvalues, write_edges, CliError, CliResult};
use crate::report::{AnalysisReport, Discovery, NodeName, Parameters, StructureSummary};

/// `fixed:<v>` or `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    EqualsQ,
}

impl LambdaPolicy {
    pub fn resolve(self, q: f64) -> f64 {
        match self {
            LambdaPolicy::Fixed(v) => v,
            LambdaPolicy::EqualsQ => q,
        }
    }
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Fixed(0.5)
    }
}

impl fmt::Display for LambdaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaPolicy::Fixed(v) => write!(f, "fixed:{v}"),
            LambdaPolicy::EqualsQ => f.write_str("q"),
        }
    }
}

impl FromStr for LambdaPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "q" => Ok(LambdaPolicy::EqualsQ),
            other => other
                .strip_prefix("fixed:")
                .and_then(|v| v.parse().ok())
                .map(LambdaPolicy::Fixed)
                .ok_or_else(|| format!("expected \"fixed:<value>\" or \"q\", got {s:?}")),
        }
    }
}

/// `identity`, `by` or `custom:b0,b1,...`.
pub fn parse_reshaping(s: &str, m: usize) -> CliResult<Reshaping> {
    match s.trim() {
        "identity" => Ok(Reshaping::Identity),
        "by" => Ok(Reshaping::BenjaminiYekutieli(m)),
        other => {
            let table = other
                .strip_prefix("custom:")
                .ok_or_else(|| CliError::Usage(format!("unknown reshaping {s:?}")))?
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("cannot parse reshaping table {s:?}")))?;
            Ok(Reshaping::Custom(table))
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Output(e.to_string()))
}

pub struct AnalyzeArgs {
    pub dag: PathBuf,
    pub pvalues: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub item_pvalues: Option<PathBuf>,
    pub intersection: Combiner,
    pub method: Method,
    pub filter: FilterSpec,
    pub q: f64,
    pub lambda_policy: LambdaPolicy,
    pub c: usize,
    pub dw: DwMode,
    pub smoothing: Option<Combiner>,
    pub reshaping: Option<String>,
    pub out: Option<PathBuf>,
    pub discoveries: Option<PathBuf>,
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<AnalysisReport> {
    let graph = read_dag(&args.dag)?;
    let m = graph.dag.len();
    let raw = match (&args.pvalues, &args.items, &args.item_pvalues) {
        (Some(p), None, None) => read_pvalues(p, &graph)?,
        (None, Some(items), Some(item_p)) => {
            let items = read_items(items, item_p, &graph)?;
            intersection_dag_pvalues(
                &graph.dag,
                &items.annotations,
                &items.pvalues,
                args.intersection,
            )?
        }
        _ => {
            return Err(CliError::Usage(
                "give either --pvalues, or both --items and --item-pvalues".into(),
            ))
        }
    };
    let h = Hierarchy::new(graph.dag.clone());
    let p = match args.smoothing {
        Some(c) => smooth_all_descendants(&h.dag, &raw, c)?,
        None => raw,
    };
    let lambda = args.lambda_policy.resolve(args.q);
    let reshaping = args
        .reshaping
        .as_deref()
        .map(|s| parse_reshaping(s, m))
        .transpose()?;
    let params = MethodParams {
        q: args.q,
        filter: args.filter,
        weights: WeightConfig {
            lambda,
            c: args.c,
            dw: args.dw.clone(),
        },
        reshaping,
        yekutieli_divisor: YEKUTIELI_DIVISOR,
    };
    let outcome = run_method(args.method, &h, &p, &params)?;

    let discoveries: Vec<Discovery> = outcome
        .discoveries
        .iter()
        .map(|&i| Discovery {
            id: i + 1,
            name: graph.name(i).to_string(),
            depth: h.depths.depth(i),
            p: p[i],
            weight: outcome.weights.get(i),
            weighted_p: outcome.weights.get(i) * p[i],
        })
        .collect();
    let report = AnalysisReport {
        parameters: Parameters {
            method: args.method.to_string(),
            filter: if args.method.uses_filter() {
                args.filter.to_string()
            } else {
                FilterSpec::Trivial.to_string()
            },
            q: args.q,
            lambda,
            lambda_policy: args.lambda_policy.to_string(),
            c: args.c,
            dw: args.dw.to_string(),
            smoothing: args.smoothing.map(|c| c.to_string()),
            reshaping: args.reshaping.clone(),
            intersection: args.items.as_ref().map(|_| args.intersection.to_string()),
        },
        structure: StructureSummary::new(&h),
        weighted_depths: outcome.weights.resolved_dw().iter().copied().collect(),
        t_star: outcome.t_star,
        rejected: outcome.base_set.len(),
        discovered: discoveries.len(),
        discoveries,
        nodes: graph
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| NodeName {
                id: i + 1,
                name: n.clone(),
            })
            .collect(),
    };

    write_output(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(path) = &args.discoveries {
        let file = File::create(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let mut writer = csv::Writer::from_writer(file);
        for d in &report.discoveries {
            writer
                .serialize(d)
                .map_err(|e| CliError::Output(e.to_string()))?;
        }
        if report.discoveries.is_empty() {
            writer
                .write_record(["id", "name", "depth", "p", "weight", "weighted_p"])
                .map_err(|e| CliError::Output(e.to_string()))?;
        }
        writer
            .flush()
            .map_err(|e| CliError::Output(e.to_string()))?;
    }
    Ok(report)
}

/// Simulation settings as read from a TOML file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub family: Option<String>,
    pub setup: Option<String>,
    pub p_nonnull: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub q: Option<f64>,
    pub lambda_policy: Option<String>,
    pub c: Option<usize>,
    pub dw: Option<String>,
    pub n_reps: Option<usize>,
    pub seed: Option<u64>,
    pub smoothing: Option<String>,
    pub methods: Option<Vec<String>>,
}

impl SimFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fills unset keys from `fallback`.
    pub fn or(self, fallback: SimFile) -> SimFile {
        SimFile {
            family: self.family.or(fallback.family),
            setup: self.setup.or(fallback.setup),
            p_nonnull: self.p_nonnull.or(fallback.p_nonnull),
            rho: self.rho.or(fallback.rho),
            q: self.q.or(fallback.q),
            lambda_policy: self.lambda_policy.or(fallback.lambda_policy),
            c: self.c.or(fallback.c),
            dw: self.dw.or(fallback.dw),
            n_reps: self.n_reps.or(fallback.n_reps),
            seed: self.seed.or(fallback.seed),
            smoothing: self.smoothing.or(fallback.smoothing),
            methods: self.methods.or(fallback.methods),
        }
    }

    pub fn into_config(self) -> CliResult<SimConfig> {
        let d = SimConfig::default();
        let q = self.q.unwrap_or(d.q);
        let policy: LambdaPolicy = match &self.lambda_policy {
            Some(s) => s.parse().map_err(CliError::Usage)?,
            None => LambdaPolicy::default(),
        };
        let config = SimConfig {
            family: parse_opt(self.family.as_deref())?.unwrap_or(d.family),
            setup: parse_opt::<SignalSetup>(self.setup.as_deref())?.unwrap_or(d.setup),
            p_nonnull: self.p_nonnull.unwrap_or(d.p_nonnull),
            rho: self.rho.unwrap_or(d.rho),
            q,
            lambda: policy.resolve(q),
            c: self.c.unwrap_or(d.c),
            dw: parse_opt(self.dw.as_deref())?.unwrap_or(d.dw),
            n_reps: self.n_reps.unwrap_or(d.n_reps),
            seed: self.seed.unwrap_or(d.seed),
            smoothing: parse_opt(self.smoothing.as_deref())?,
            methods: match self.methods {
                Some(list) => list
                    .iter()
                    .map(|s| s.parse::<MethodSpec>())
                    .collect::<Result<_, _>>()?,
                None => d.methods,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_opt<T: FromStr<Err = focusfdr::Error>>(s: Option<&str>) -> CliResult<Option<T>> {
    Ok(s.map(str::parse).transpose()?)
}

pub fn simulate(config: &SimConfig, out: Option<&Path>) -> CliResult<()> {
    let summary = run_simulation(config)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &summary.rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Output(e.to_string()))?;
    write_output(out, &String::from_utf8_lossy(&bytes))
}

/// Default trial or replication count for a suite.
pub fn default_trials(suite: Suite) -> usize {
    match suite {
        Suite::Condition1 | Suite::Superuniformity => 10_000,
        _ => 1000,
    }
}

/// Runs the named suites and prints one line per suite; returns whether all
/// passed.
pub fn check(suites: &[Suite], trials: Option<usize>, seed: u64) -> CliResult<bool> {
    let mut all = true;
    for &suite in suites {
        let report = run_suite(suite, trials.unwrap_or_else(|| default_trials(suite)), seed)?;
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {suite}");
        for line in &report.evidence {
            println!("    {line}");
        }
        all &= report.passed;
    }
    Ok(all)
}

pub fn graph_info(path: &Path, out: Option<&Path>) -> CliResult<StructureSummary> {
    let graph = read_dag(path)?;
    let summary = StructureSummary::new(&Hierarchy::new(graph.dag));
    write_output(out, &to_json(&summary)?)?;
    Ok(summary)
}

pub fn export_graph(family: &GraphFamily, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let dag = generate_graph(family, &mut stream_rng(seed, 0));
    let mut buf = Vec::new();
    write_edges(&dag, &mut buf)?;
    write_output(out, &String::from_utf8_lossy(&buf))
}
