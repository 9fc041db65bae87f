//! Seeded experiment harness.
//!
//! Every unit of work draws from its own stream, seeded from
//! `(master_seed, n, graph index, replicate index)`. Units may run on any
//! number of threads; results are gathered in index order and reduced
//! sequentially, so output is bit-identical regardless of parallelism.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::bias::{attention_centrality, bias_variance_from_alpha};
use crate::config::{ExperimentConfig, Topology};
use crate::error::{Error, Result};
use crate::graph::{sample_poisson_graph, DegreeParams, Graph};
use crate::pooling::{Pooler, RuleAssignment};
use crate::random_graph::{expected_bias_variance_poisson, AsymptoticParams};
use crate::rng::{derive_seed, TAG_DRAW, TAG_GRAPH};
use crate::stats::{CovarianceSpec, ErrorSampler};

pub const CSV_HEADER: &str = "n,mean_bias,var_bias,se_mean,se_var,analytic_var,replicates_used,seed_base";

/// Summary of the bias distribution at one network size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub mean_bias: f64,
    pub var_bias: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub analytic_var: f64,
    pub replicates_used: usize,
    pub seed_base: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Sample mean and unbiased variance, reduced in slice order.
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|b| (b - mean) * (b - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Bias samples for one fixed graph: replicate `r` uses the stream
/// `derive_seed(seed, [TAG_DRAW, coords.., r])`.
#[allow(clippy::too_many_arguments)]
fn bias_samples(
    graph: &Graph,
    pooler: &Pooler,
    sampler: &ErrorSampler,
    rules: &RuleAssignment,
    theta: f64,
    seed: u64,
    coords: &[u64],
    replicates: usize,
) -> Result<Vec<f64>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut key = Vec::with_capacity(coords.len() + 2);
            key.push(TAG_DRAW);
            key.extend_from_slice(coords);
            key.push(r as u64);
            let errors = sampler.sample_seeded(derive_seed(seed, &key));
            let x: Vec<f64> = errors.iter().map(|e| theta + e).collect();
            pooler.network_bias(graph, &x, rules)
        })
        .collect()
}

/// Exact variance of the bias on a fixed graph.
///
/// The bias is linear in the forecasts and invariant to a common shift, so
/// `B = w'ε` with `wₖ` the bias at the k-th unit vector and `Var = w'Σw`.
/// Under common variance and correlation this reduces to the
/// attention-centrality formula, which is used directly.
pub fn analytic_fixed_variance(graph: &Graph, spec: &CovarianceSpec, rules: &RuleAssignment) -> Result<f64> {
    if let CovarianceSpec::Equicorrelated { n, sigma2, rho } = *spec {
        return Ok(bias_variance_from_alpha(&attention_centrality(graph), sigma2, rho, n));
    }
    let pooler = Pooler::for_rules(spec, rules)?;
    let n = graph.n();
    let mut unit = vec![0.0; n];
    let mut w = Vec::with_capacity(n);
    for k in 0..n {
        unit[k] = 1.0;
        w.push(pooler.network_bias(graph, &unit, rules)?);
        unit[k] = 0.0;
    }
    let sigma = spec.covariance_matrix();
    let mut v = 0.0;
    for i in 0..n {
        for j in 0..n {
            v += w[i] * sigma[(i, j)] * w[j];
        }
    }
    Ok(v)
}

/// Bias distribution on deterministic topologies, one graph per `n`.
pub fn run_fixed_graph(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    if config.topology.is_random() {
        return Err(Error::config(
            "topology.kind",
            "run_fixed_graph needs a deterministic topology",
        ));
    }
    let mut rows = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let graph = config.topology.build(n)?;
        let spec = config.cov.spec_for(n)?;
        let rules = config.rules.resolve(n)?;
        let pooler = Pooler::for_rules(&spec, &rules)?;
        let sampler = ErrorSampler::new(&spec)?;
        let seed_base = derive_seed(config.master_seed, &[n as u64]);
        let samples = bias_samples(
            &graph,
            &pooler,
            &sampler,
            &rules,
            config.theta,
            seed_base,
            &[],
            config.replicates,
        )?;
        let (mean, var) = mean_var(&samples);
        let r = samples.len() as f64;
        rows.push(SweepRow {
            n,
            mean_bias: mean,
            var_bias: var,
            se_mean: (var / r).sqrt(),
            se_var: normal_variance_se(var, samples.len()),
            analytic_var: analytic_fixed_variance(&graph, &spec, &rules)?,
            replicates_used: samples.len(),
            seed_base,
        });
    }
    Ok(SweepResult { rows })
}

/// Normal-theory standard error of a sample variance: `v √(2/(R−1))`.
pub fn normal_variance_se(variance: f64, replicates: usize) -> f64 {
    if replicates < 2 {
        return f64::NAN;
    }
    variance * (2.0 / (replicates - 1) as f64).sqrt()
}

/// Bias distribution over Poisson random graphs with `p = ⟨d⟩/(n−1)`:
/// `graph_replicates` graphs per `n`, `replicates` error draws per graph.
///
/// `se_var` is the standard error of the mean of per-graph variances, since
/// the pooled samples are a mixture over graphs rather than a single normal.
pub fn run_random_graph(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let Topology::Poisson { mean_degree } = config.topology else {
        return Err(Error::config(
            "topology.kind",
            "run_random_graph needs topology poisson",
        ));
    };
    let (sigma2, _) = config
        .cov
        .equi_params()
        .ok_or_else(|| Error::config("cov.kind", "poisson sweeps require cov.kind = equi"))?;
    let mut rows = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let params =
            DegreeParams::from_mean_degree(n, mean_degree).map_err(|e| Error::config("n_values", e.to_string()))?;
        let spec = config.cov.spec_for(n)?;
        let rules = config.rules.resolve(n)?;
        let pooler = Pooler::for_rules(&spec, &rules)?;
        let sampler = ErrorSampler::new(&spec)?;
        let seed_base = derive_seed(config.master_seed, &[n as u64]);
        let per_graph: Vec<Vec<f64>> = (0..config.graph_replicates)
            .into_par_iter()
            .map(|g| {
                let graph = sample_poisson_graph(params, derive_seed(seed_base, &[TAG_GRAPH, g as u64]))?;
                bias_samples(
                    &graph,
                    &pooler,
                    &sampler,
                    &rules,
                    config.theta,
                    seed_base,
                    &[g as u64],
                    config.replicates,
                )
            })
            .collect::<Result<_>>()?;
        let pooled: Vec<f64> = per_graph.iter().flatten().copied().collect();
        let (mean, var) = mean_var(&pooled);
        let graph_vars: Vec<f64> = per_graph.iter().map(|s| mean_var(s).1).collect();
        let (_, spread) = mean_var(&graph_vars);
        let se_var = if graph_vars.len() > 1 {
            (spread / graph_vars.len() as f64).sqrt()
        } else {
            normal_variance_se(var, pooled.len())
        };
        rows.push(SweepRow {
            n,
            mean_bias: mean,
            var_bias: var,
            se_mean: (var / pooled.len() as f64).sqrt(),
            se_var,
            analytic_var: expected_bias_variance_poisson(AsymptoticParams::new(mean_degree, sigma2, n)?)?,
            replicates_used: pooled.len(),
            seed_base,
        });
    }
    Ok(SweepResult { rows })
}

/// Dispatches on the topology.
pub fn run(config: &ExperimentConfig) -> Result<SweepResult> {
    if config.topology.is_random() {
        run_random_graph(config)
    } else {
        run_fixed_graph(config)
    }
}

/// Runs on a dedicated pool of `threads` workers; results do not depend on
/// the count.
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run(config))
}

impl SweepResult {
    /// CSV with [`CSV_HEADER`]; floats use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{},{}",
                r.n, r.mean_bias, r.var_bias, r.se_mean, r.se_var, r.analytic_var, r.replicates_used, r.seed_base
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `{CSV_HEADER}`, found `{}`",
                    other.unwrap_or("")
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what} in `{line}`", i + 1));
            if f.len() != 8 {
                return Err(bad("field count"));
            }
            let float = |k: usize, name: &str| f[k].parse::<f64>().map_err(|_| bad(name));
            rows.push(SweepRow {
                n: f[0].parse().map_err(|_| bad("n"))?,
                mean_bias: float(1, "mean_bias")?,
                var_bias: float(2, "var_bias")?,
                se_mean: float(3, "se_mean")?,
                se_var: float(4, "se_var")?,
                analytic_var: float(5, "analytic_var")?,
                replicates_used: f[6].parse().map_err(|_| bad("replicates_used"))?,
                seed_base: f[7].parse().map_err(|_| bad("seed_base"))?,
            });
        }
        Ok(SweepResult { rows })
    }
}

pub fn write_results(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, result.to_csv()).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<SweepResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SweepResult::from_csv(&text)
}
