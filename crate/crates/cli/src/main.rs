//! `netpool`: graphs, attention centrality, pooled forecasts, closed forms
//! and Monte Carlo experiments from the command line.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors (including
//! unreadable input files), 1 for failures while computing or writing.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use netpool::bias::{self, attention_centrality};
use netpool::config::{
    CovModel, ExperimentConfig, RulePattern, Topology, DEFAULT_GRAPH_REPLICATES, DEFAULT_REPLICATES,
};
use netpool::graph::{sample_poisson_graph, DegreeParams, Graph};
use netpool::montecarlo::{self, SweepResult, CSV_HEADER};
use netpool::pooling::{Pooler, RuleAssignment};
use netpool::random_graph::{self, AsymptoticParams};
use netpool::stats::CovarianceSpec;

use output::{full, sig6, table, Format, Rendered};

const SEED_ENV: &str = "NETPOOL_SEED";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<netpool::Error> for CliError {
    fn from(e: netpool::Error) -> Self {
        match e {
            netpool::Error::Numeric(_) | netpool::Error::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "netpool",
    version,
    about = "Forecast pooling on networks: bias, attention centrality and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a graph: edge list (table), adjacency matrix (csv) or JSON
    Graph(GraphCmd),
    /// Attention centrality of every node
    Alpha(AlphaCmd),
    /// Combined forecasts, pooled value and network bias for one forecast vector
    Pool(PoolCmd),
    /// Evaluate a closed-form quantity
    Analytic(AnalyticCmd),
    /// Monte Carlo bias study on a fixed topology
    Simulate(RunCmd),
    /// Monte Carlo bias study over Poisson random graphs
    Sweep(RunCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TopologyKind {
    Star,
    Line,
    Ring,
    DRegular,
    Complete,
    Poisson,
}

impl TopologyKind {
    fn resolve(self, d: Option<usize>, mean_degree: Option<f64>) -> CliResult<Topology> {
        Ok(match self {
            TopologyKind::Star => Topology::Star,
            TopologyKind::Line => Topology::Line,
            TopologyKind::Ring => Topology::Ring,
            TopologyKind::Complete => Topology::Complete,
            TopologyKind::DRegular => Topology::DRegular {
                d: d.ok_or_else(|| usage("--d is required for --topology d-regular"))?,
            },
            TopologyKind::Poisson => Topology::Poisson {
                mean_degree: mean_degree.ok_or_else(|| usage("--mean-degree is required for --topology poisson"))?,
            },
        })
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output format; defaults to table on standard output and csv with --out
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the result to this file instead of standard output
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn write(&self, rendered: &Rendered) -> CliResult<()> {
        let default = if self.out.is_some() { Format::Csv } else { Format::Table };
        let text = rendered.select(self.format.unwrap_or(default));
        output::emit(&text, self.out.as_deref()).map_err(|e| {
            let target = self
                .out
                .as_deref()
                .map_or("standard output".into(), |p| p.display().to_string());
            CliError::Runtime(format!("cannot write {target}: {e}"))
        })
    }
}

/// A topology built on the spot, or an edge-list file.
#[derive(Args)]
struct GraphSource {
    /// Topology to build
    #[arg(
        long,
        value_enum,
        conflicts_with = "graph_file",
        required_unless_present = "graph_file"
    )]
    topology: Option<TopologyKind>,
    /// Number of nodes
    #[arg(long)]
    n: Option<usize>,
    /// Neighbours per node for d-regular graphs
    #[arg(long)]
    d: Option<usize>,
    /// Expected neighbour count for Poisson graphs
    #[arg(long)]
    mean_degree: Option<f64>,
    /// Seed for Poisson graphs (falls back to NETPOOL_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Edge-list file: `n=<nodes>` then one 1-based `i j` pair per line
    #[arg(long, value_name = "PATH")]
    graph_file: Option<PathBuf>,
}

impl GraphSource {
    fn load(&self) -> CliResult<Graph> {
        if let Some(path) = &self.graph_file {
            return Graph::read_edge_list(path).map_err(|e| usage(e.to_string()));
        }
        let kind = self
            .topology
            .ok_or_else(|| usage("one of --topology or --graph-file is required"))?;
        let n = self.n.ok_or_else(|| usage("--n is required with --topology"))?;
        let topology = kind.resolve(self.d, self.mean_degree)?;
        match topology {
            Topology::Poisson { mean_degree } => {
                let params = DegreeParams::from_mean_degree(n, mean_degree)?;
                let seed = match self.seed {
                    Some(s) => s,
                    None => env_seed()?.unwrap_or(0),
                };
                Ok(sample_poisson_graph(params, seed)?)
            }
            fixed => Ok(fixed.build(n)?),
        }
    }
}

#[derive(Args)]
struct GraphCmd {
    #[command(flatten)]
    source: GraphSource,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AlphaCmd {
    #[command(flatten)]
    source: GraphSource,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CovArgs {
    /// Common error variance
    #[arg(long, default_value_t = 1.0, conflicts_with = "sigmas")]
    sigma2: f64,
    /// Common error correlation, in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Per-expert error standard deviations, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sigmas: Option<Vec<f64>>,
}

impl CovArgs {
    fn spec(&self, n: usize) -> CliResult<CovarianceSpec> {
        let spec = match &self.sigmas {
            Some(s) if s.len() != n => {
                return Err(usage(format!(
                    "--sigmas has {} values but the graph has {n} nodes",
                    s.len()
                )))
            }
            Some(s) => CovarianceSpec::heterogeneous(s.clone(), self.rho),
            None => CovarianceSpec::equicorrelated(n, self.sigma2, self.rho),
        };
        spec.map_err(|e| usage(format!("covariance: {e}")))
    }
}

#[derive(Args)]
struct PoolCmd {
    #[command(flatten)]
    source: GraphSource,
    /// Forecasts, comma separated, one per node
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// File with one forecast per line
    #[arg(long, value_name = "PATH")]
    x_file: Option<PathBuf>,
    /// Rules as `<dm>|<experts>`, e.g. `S|SSB`; one expert rule applies to all
    #[arg(long, default_value = "S|S")]
    rules: String,
    /// True value; adds forecast errors to the output
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[command(flatten)]
    cov: CovArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    /// Bias variance on a star (--n, --sigma2, --rho)
    StarVar,
    /// Bias variance on a line (--n, --sigma2, --rho)
    LineVar,
    /// K factor at --mean-degree (or --x)
    K,
    /// Exponential integral Ei(--x)
    Ei,
    /// Expected bias variance over Poisson graphs (--mean-degree, --sigma2, --n)
    PoissonVar,
    /// Decision-maker posterior precision (--n, --sigma2, --rho)
    DmPrecision,
    /// K(d)(1 + d) at d = --mean-degree
    KOnePlusD,
    /// Expected number of neighbour pairs (--n, --p)
    Choose2,
    /// Expected reciprocal neighbour degree (--mean-degree)
    RecipDegree,
    /// Expected squared reciprocal neighbour degree (--mean-degree)
    RecipDegreeSq,
}

#[derive(Args)]
struct AnalyticCmd {
    /// Quantity to evaluate
    #[arg(value_enum)]
    quantity: Quantity,
    /// Number of experts
    #[arg(long)]
    n: Option<usize>,
    /// Common error variance
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Common error correlation
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Argument for Ei and K
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    /// Expected neighbour count
    #[arg(long)]
    mean_degree: Option<f64>,
    /// Edge probability
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RunCmd {
    /// JSON experiment configuration
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration and NETPOOL_SEED
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
    /// Topology (overrides the configuration)
    #[arg(long, value_enum)]
    topology: Option<TopologyKind>,
    /// Neighbours per node for d-regular graphs
    #[arg(long)]
    d: Option<usize>,
    /// Expected neighbour count for Poisson graphs
    #[arg(long)]
    mean_degree: Option<f64>,
    /// Network sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    /// Forecast draws per graph
    #[arg(long)]
    replicates: Option<usize>,
    /// Sampled graphs per size (Poisson only)
    #[arg(long)]
    graph_replicates: Option<usize>,
    /// True value
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Common error variance
    #[arg(long)]
    sigma2: Option<f64>,
    /// Common error correlation
    #[arg(long)]
    rho: Option<f64>,
    /// Rules as `<dm>|<experts>`
    #[arg(long)]
    rules: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("{SEED_ENV}: {e}"))),
    }
}

fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn graph(cmd: GraphCmd) -> CliResult<()> {
    let g = cmd.source.load()?;
    let adjacency = g.adjacency_matrix();
    let mut csv = String::new();
    for i in 0..g.n() {
        let row: Vec<String> = (0..g.n()).map(|j| (adjacency[(i, j)] as u8).to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let edges: Vec<[usize; 2]> = g.edges().map(|(i, j)| [i + 1, j + 1]).collect();
    let rendered = Rendered {
        csv,
        json: json!({ "n": g.n(), "edges": edges }),
        table: g.to_edge_list(),
    };
    // The edge list is the natural file form, so it stays the default with --out.
    let mut output = cmd.output;
    output.format.get_or_insert(Format::Table);
    output.write(&rendered)
}

fn alpha(cmd: AlphaCmd) -> CliResult<()> {
    let g = cmd.source.load()?;
    let a = attention_centrality(&g);
    let degrees = g.degrees();
    let rows: Vec<Vec<String>> =
        a.0.iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), degrees[i].to_string(), sig6(*v)])
            .collect();
    let rendered = Rendered {
        csv: a.to_csv(),
        json: json!({ "n": g.n(), "degree": degrees, "alpha": a.0 }),
        table: table(&["node", "degree", "alpha"], &rows),
    };
    cmd.output.write(&rendered)
}

fn read_forecasts(cmd: &PoolCmd) -> CliResult<Vec<f64>> {
    match (&cmd.x, &cmd.x_file) {
        (Some(_), Some(_)) => Err(usage("--x and --x-file are ambiguous together; give only one")),
        (None, None) => Err(usage("forecasts are required: --x or --x-file")),
        (Some(x), None) => Ok(x.clone()),
        (None, Some(path)) => read_input(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(k, l)| {
                l.parse::<f64>()
                    .map_err(|_| usage(format!("{}: value {} `{l}` is not a number", path.display(), k + 1)))
            })
            .collect(),
    }
}

fn pool(cmd: PoolCmd) -> CliResult<()> {
    let g = cmd.source.load()?;
    let x = read_forecasts(&cmd)?;
    let n = g.n();
    if x.len() != n {
        return Err(usage(format!("{} forecasts given for a graph with {n} nodes", x.len())));
    }
    let pattern: RuleAssignment = cmd.rules.parse().map_err(|e| usage(format!("--rules: {e}")))?;
    let rules = RulePattern(pattern)
        .resolve(n)
        .map_err(|e| usage(format!("--rules: {e}")))?;
    let spec = cmd.cov.spec(n)?;
    let pooler = Pooler::for_rules(&spec, &rules)?;
    let combined = pooler.combined(&g, &x, &rules)?;
    let pooled = pooler.combine_combined(&g, &x, &rules)?;
    let direct = pooler.dm(rules.dm_rule, &x)?;
    let bias = pooled - direct;

    let mut summary: Vec<(&str, f64)> = vec![("pooled", pooled), ("direct", direct), ("bias", bias)];
    if let Some(theta) = cmd.theta {
        summary.push(("pooled_error", pooled - theta));
        summary.push(("direct_error", direct - theta));
    }

    let mut csv = String::from("quantity,node,value\n");
    for (i, v) in combined.iter().enumerate() {
        csv.push_str(&format!("combined,{},{}\n", i + 1, full(*v)));
    }
    for (name, v) in &summary {
        csv.push_str(&format!("{name},,{}\n", full(*v)));
    }

    let rows: Vec<Vec<String>> = x
        .iter()
        .zip(&combined)
        .enumerate()
        .map(|(i, (xi, ci))| vec![(i + 1).to_string(), sig6(*xi), sig6(*ci)])
        .collect();
    let mut text = format!("rules {rules}\n");
    text.push_str(&table(&["node", "x", "combined"], &rows));
    text.push('\n');
    let summary_rows: Vec<Vec<String>> = summary.iter().map(|(k, v)| vec![k.to_string(), sig6(*v)]).collect();
    text.push_str(&table(&["quantity", "value"], &summary_rows));

    let mut json = json!({
        "rules": rules.to_string(),
        "x": x,
        "combined": combined,
        "pooled": pooled,
        "direct": direct,
        "bias": bias,
    });
    if let Some(theta) = cmd.theta {
        json["theta"] = json!(theta);
        json["pooled_error"] = json!(pooled - theta);
        json["direct_error"] = json!(direct - theta);
    }
    cmd.output.write(&Rendered { csv, json, table: text })
}

fn analytic(cmd: AnalyticCmd) -> CliResult<()> {
    let need_n = || cmd.n.ok_or_else(|| usage("--n is required for this quantity"));
    let need_md = || {
        cmd.mean_degree
            .ok_or_else(|| usage("--mean-degree is required for this quantity"))
    };
    let value = match cmd.quantity {
        Quantity::StarVar => bias::star_bias_variance(need_n()?, cmd.sigma2, cmd.rho)?,
        Quantity::LineVar => bias::line_bias_variance(need_n()?, cmd.sigma2, cmd.rho)?,
        Quantity::DmPrecision => bias::dm_posterior_precision(need_n()?, cmd.sigma2, cmd.rho)?,
        Quantity::Ei => random_graph::exponential_integral(cmd.x.ok_or_else(|| usage("--x is required for ei"))?)?,
        Quantity::K => {
            let arg = cmd
                .mean_degree
                .or(cmd.x)
                .ok_or_else(|| usage("--mean-degree (or --x) is required for k"))?;
            random_graph::k_factor(arg)?
        }
        Quantity::KOnePlusD => random_graph::k_times_one_plus_d(need_md()?)?,
        Quantity::RecipDegree => random_graph::expected_recip_neighbor_degree(need_md()?)?,
        Quantity::RecipDegreeSq => random_graph::expected_recip_neighbor_degree_sq(need_md()?)?,
        Quantity::PoissonVar => {
            random_graph::expected_bias_variance_poisson(AsymptoticParams::new(need_md()?, cmd.sigma2, need_n()?)?)?
        }
        Quantity::Choose2 => {
            random_graph::expected_choose2(need_n()?, cmd.p.ok_or_else(|| usage("--p is required for choose2"))?)?
        }
    };
    let name = cmd
        .quantity
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    let rendered = Rendered {
        csv: format!("quantity,value\n{name},{}\n", full(value)),
        json: json!({ "quantity": name, "value": value }),
        table: format!("{name}  {}\n", sig6(value)),
    };
    cmd.output.write(&rendered)
}

impl RunCmd {
    fn config(&self, random: bool) -> CliResult<ExperimentConfig> {
        let fallback_seed = env_seed()?.unwrap_or(0);
        let mut config = match &self.config {
            Some(path) => {
                let text = read_input(path)?;
                ExperimentConfig::from_json_with_seed_fallback(&text, fallback_seed)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig {
                theta: 0.0,
                cov: CovModel::Equi { sigma2: 1.0, rho: 0.0 },
                topology: match (self.topology, random) {
                    (Some(_), _) => Topology::Star, // replaced below
                    (None, true) => Topology::Poisson {
                        mean_degree: self
                            .mean_degree
                            .ok_or_else(|| usage("--mean-degree is required without --config"))?,
                    },
                    (None, false) => return Err(usage("--topology is required without --config")),
                },
                n_values: self
                    .n_values
                    .clone()
                    .ok_or_else(|| usage("--n-values is required without --config"))?,
                replicates: DEFAULT_REPLICATES,
                graph_replicates: DEFAULT_GRAPH_REPLICATES,
                rules: RulePattern::default(),
                master_seed: fallback_seed,
            },
        };

        if let Some(kind) = self.topology {
            let d = self.d.or(match config.topology {
                Topology::DRegular { d } => Some(d),
                _ => None,
            });
            let md = self.mean_degree.or(match config.topology {
                Topology::Poisson { mean_degree } => Some(mean_degree),
                _ => None,
            });
            config.topology = kind.resolve(d, md)?;
        } else {
            match (&mut config.topology, self.d, self.mean_degree) {
                (Topology::DRegular { d }, Some(v), _) => *d = v,
                (Topology::Poisson { mean_degree }, _, Some(v)) => *mean_degree = v,
                (_, Some(_), _) => return Err(usage("--d only applies to d-regular topologies")),
                (_, _, Some(_)) => return Err(usage("--mean-degree only applies to poisson topologies")),
                _ => {}
            }
        }
        if let Some(v) = &self.n_values {
            config.n_values = v.clone();
        }
        if let Some(v) = self.replicates {
            config.replicates = v;
        }
        if let Some(v) = self.graph_replicates {
            config.graph_replicates = v;
        }
        if let Some(v) = self.theta {
            config.theta = v;
        }
        if self.sigma2.is_some() || self.rho.is_some() {
            match &mut config.cov {
                CovModel::Equi { sigma2, rho } => {
                    *sigma2 = self.sigma2.unwrap_or(*sigma2);
                    *rho = self.rho.unwrap_or(*rho);
                }
                CovModel::Hetero { rho, .. } if self.sigma2.is_none() => *rho = self.rho.unwrap_or(*rho),
                _ => return Err(usage("--sigma2/--rho only override an equicorrelated `cov`")),
            }
        }
        if let Some(r) = &self.rules {
            config.rules = RulePattern(r.parse().map_err(|e| usage(format!("--rules: {e}")))?);
        }
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        config.validate()?;

        match (random, config.topology.is_random()) {
            (true, false) => Err(usage("sweep needs a poisson topology; use simulate for fixed graphs")),
            (false, true) => Err(usage("simulate needs a fixed topology; use sweep for poisson graphs")),
            _ => Ok(config),
        }
    }

    fn execute(&self, random: bool) -> CliResult<()> {
        let config = self.config(random)?;
        let result = match self.threads {
            Some(0) => return Err(usage("--threads must be at least 1")),
            Some(k) => montecarlo::run_with_threads(&config, k)?,
            None => montecarlo::run(&config)?,
        };
        self.output.write(&render_sweep(&config, &result))
    }
}

fn render_sweep(config: &ExperimentConfig, result: &SweepResult) -> Rendered {
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                sig6(r.mean_bias),
                sig6(r.var_bias),
                sig6(r.se_mean),
                sig6(r.se_var),
                sig6(r.analytic_var),
                r.replicates_used.to_string(),
                r.seed_base.to_string(),
            ]
        })
        .collect();
    let header: Vec<&str> = CSV_HEADER.split(',').collect();
    let json_rows: Vec<serde_json::Value> = result
        .rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "mean_bias": r.mean_bias,
                "var_bias": r.var_bias,
                "se_mean": r.se_mean,
                "se_var": r.se_var,
                "analytic_var": r.analytic_var,
                "replicates_used": r.replicates_used,
                "seed_base": r.seed_base,
            })
        })
        .collect();
    let config_json: serde_json::Value =
        serde_json::from_str(&config.to_json()).expect("configuration serializes to valid JSON");
    Rendered {
        csv: result.to_csv(),
        json: json!({ "config": config_json, "rows": json_rows }),
        table: table(&header, &rows),
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Graph(c) => graph(c),
        Command::Alpha(c) => alpha(c),
        Command::Pool(c) => pool(c),
        Command::Analytic(c) => analytic(c),
        Command::Simulate(c) => c.execute(false),
        Command::Sweep(c) => c.execute(true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netpool: {e}");
            ExitCode::from(e.code())
        }
    }
}
