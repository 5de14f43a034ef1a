mod commands;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use focusfdr::checks::Suite;
use focusfdr::simulation::GraphFamily;
use focusfdr::{Combiner, DwMode, FilterSpec, Method};

use commands::{AnalyzeArgs, LambdaPolicy, SimFile};
use io::{CliError, CliResult};

const EXIT_INPUT: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "focusfdr",
    version,
    about = "Focused FDR control on DAGs of hypotheses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a testing procedure on a graph and its p-values.
    Analyze {
        /// Edge file, CSV with header `parent,child`.
        #[arg(long)]
        dag: PathBuf,
        /// P-value file, CSV with header `node,p`.
        #[arg(long)]
        pvalues: Option<PathBuf>,
        /// Node annotations, CSV with header `node,item`.
        #[arg(long, requires = "item_pvalues")]
        items: Option<PathBuf>,
        /// Item p-values, CSV with header `item,p`.
        #[arg(long, requires = "items")]
        item_pvalues: Option<PathBuf>,
        /// Combiner for node p-values in intersection mode.
        #[arg(long, default_value = "simes")]
        intersection: Combiner,
        /// bh | storey-bh | by | fbh | wfbh | wrfbh | yekutieli-tree
        #[arg(long, default_value = "wfbh")]
        method: Method,
        /// trivial | ds | outer | screen:<s>
        #[arg(long, default_value = "ds")]
        filter: FilterSpec,
        #[arg(long, default_value_t = 0.05)]
        q: f64,
        /// fixed:<value> | q
        #[arg(long, default_value = "fixed:0.5")]
        lambda_policy: LambdaPolicy,
        /// Groups of at most this size skip the null-proportion estimate.
        #[arg(long, default_value_t = 1)]
        c: usize,
        /// Weighted depths: auto | none | comma list.
        #[arg(long, default_value = "auto")]
        dw: DwMode,
        /// Smooth p-values over all descendants with this combiner.
        #[arg(long)]
        smoothing: Option<Combiner>,
        /// Reshaping for wrfbh: identity | by | custom:<b0,b1,...>
        #[arg(long)]
        reshaping: Option<String>,
        /// JSON report path; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Discoveries CSV path.
        #[arg(long)]
        discoveries: Option<PathBuf>,
    },
    /// Run a Monte Carlo simulation and write one CSV row per cell.
    Simulate {
        /// TOML file; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// wide-tree | bipartite1 | deep-tree | bipartite2
        #[arg(long)]
        family: Option<String>,
        /// global | decremental | incremental
        #[arg(long)]
        setup: Option<String>,
        /// Leaf non-null proportions, comma separated.
        #[arg(long = "p", value_delimiter = ',')]
        p_nonnull: Option<Vec<f64>>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        lambda_policy: Option<String>,
        #[arg(long)]
        c: Option<usize>,
        #[arg(long)]
        dw: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        smoothing: Option<String>,
        /// Method specs `method[:filter][@combiner]`, comma separated.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a property or Monte Carlo suite; `all` runs every suite.
    Check {
        suite: String,
        /// Random instances or replications per suite.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print a structure summary of an edge file as JSON.
    GraphInfo {
        dag: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated graph as an edge file.
    ExportGraph {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("FOCUSFDR_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("FOCUSFDR_THREADS={value:?} is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Output(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    configure_threads()?;
    match cli.command {
        Command::Analyze {
            dag,
            pvalues,
            items,
            item_pvalues,
            intersection,
            method,
            filter,
            q,
            lambda_policy,
            c,
            dw,
            smoothing,
            reshaping,
            out,
            discoveries,
        } => {
            commands::analyze(&AnalyzeArgs {
                dag,
                pvalues,
                items,
                item_pvalues,
                intersection,
                method,
                filter,
                q,
                lambda_policy,
                c,
                dw,
                smoothing,
                reshaping,
                out,
                discoveries,
            })?;
            Ok(true)
        }
        Command::Simulate {
            config,
            family,
            setup,
            p_nonnull,
            rho,
            q,
            lambda_policy,
            c,
            dw,
            reps,
            seed,
            smoothing,
            methods,
            out,
        } => {
            let flags = SimFile {
                family,
                setup,
                p_nonnull,
                rho,
                q,
                lambda_policy,
                c,
                dw,
                n_reps: reps,
                seed,
                smoothing,
                methods,
            };
            let file = match &config {
                Some(path) => SimFile::load(path)?,
                None => SimFile::default(),
            };
            let config = flags.or(file).into_config()?;
            commands::simulate(&config, out.as_deref())?;
            Ok(true)
        }
        Command::Check {
            suite,
            trials,
            seed,
        } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            commands::check(&suites, trials, seed)
        }
        Command::GraphInfo { dag, out } => {
            commands::graph_info(&dag, out.as_deref())?;
            Ok(true)
        }
        Command::ExportGraph { family, seed, out } => {
            let family: GraphFamily = family.parse()?;
            commands::export_graph(&family, seed, out.as_deref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
