//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p netpool --test acceptance`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use netpool::bias::{attention_centrality, dm_posterior_precision, network_bias, star_bias_variance};
use netpool::config::{CovModel, ExperimentConfig, RulePattern, Topology};
use netpool::graph::{make_complete, make_line, make_ring, make_star, sample_poisson_graph, DegreeParams, Graph};
use netpool::montecarlo::{normal_variance_se, run_with_threads, SweepResult};
use netpool::pooling::{combine_combined, combined_forecasts, RuleAssignment};
use netpool::random_graph::{exponential_integral, k_factor};
use netpool::rng::{derive_seed, stream};
use netpool::stats::{precision_matrix_closed_form, CovarianceSpec, ErrorSampler};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_graph(rng: &mut impl Rng, max_n: usize) -> Graph {
    let n = rng.random_range(2..=max_n);
    let p = rng.random::<f64>();
    sample_poisson_graph(DegreeParams::new(n, p).unwrap(), rng.random()).unwrap()
}

fn three_expert_cases() -> Outcome {
    let g = make_line(3).unwrap();
    let spec = CovarianceSpec::equicorrelated(3, 1.0, 0.0).unwrap();
    let r = RuleAssignment::all_simple(3);
    let cases = [
        ([1.0, 5.0, 3.0], [3.0, 3.0, 4.0], 1.0 / 3.0),
        ([1.0, 3.0, 5.0], [2.0, 3.0, 4.0], 0.0),
        ([3.0, 1.0, 5.0], [2.0, 3.0, 3.0], -1.0 / 3.0),
    ];
    let mut worst = 0.0f64;
    for (x, combined, bias) in cases {
        let c = combined_forecasts(&g, &x, &spec, &r).map_err(|e| e.to_string())?;
        for (a, b) in c.iter().zip(combined) {
            worst = worst.max((a - b).abs());
        }
        let b = network_bias(&g, &x, &spec, &r).map_err(|e| e.to_string())?;
        worst = worst.max((b - bias).abs());
    }
    check(worst <= 1e-12, format!("max abs error {worst:.1e}"))
}

fn attention() -> Outcome {
    // Path labelling A-B-C, and the star builder with its centre first.
    let path = attention_centrality(&make_line(3).unwrap());
    let star = attention_centrality(&make_star(3).unwrap());
    let star_err = path
        .0
        .iter()
        .zip([-1.0 / 6.0, 2.0 / 6.0, -1.0 / 6.0])
        .chain(star.0.iter().zip([2.0 / 6.0, -1.0 / 6.0, -1.0 / 6.0]))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let mut rng = stream(101);
    let worst_sum = (0..1000)
        .map(|_| attention_centrality(&random_graph(&mut rng, 50)).sum().abs())
        .fold(0.0, f64::max);
    check(
        star_err <= 1e-15 && worst_sum <= 1e-12,
        format!("star-3 error {star_err:.1e}; max |sum alpha| over 1000 graphs {worst_sum:.1e}"),
    )
}

fn bias_identity() -> Outcome {
    let mut rng = stream(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g = random_graph(&mut rng, 40);
        let n = g.n();
        let theta = rng.random_range(-10.0..10.0);
        let x: Vec<f64> = (0..n).map(|_| theta + rng.random_range(-5.0..5.0)).collect();
        let eps: Vec<f64> = x.iter().map(|x| x - theta).collect();
        let spec = CovarianceSpec::equicorrelated(n, 1.0, 0.0).unwrap();
        let b = network_bias(&g, &x, &spec, &RuleAssignment::all_simple(n)).map_err(|e| e.to_string())?;
        let id = attention_centrality(&g)
            .weighted_error(&eps)
            .map_err(|e| e.to_string())?;
        worst = worst.max((b - id).abs());
    }
    check(
        worst <= 1e-12,
        format!("max |bias - (1/n) sum alpha eps| = {worst:.1e}"),
    )
}

fn bayes_collapse() -> Outcome {
    let mut rng = stream(303);
    let mut worst = 0.0f64;
    let mut count = 0;
    for sigma2 in [0.5, 1.2, 4.0] {
        for rho in [0.0, 0.3, 0.8] {
            for _ in 0..200 {
                let g = random_graph(&mut rng, 30);
                let n = g.n();
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let spec = CovarianceSpec::equicorrelated(n, sigma2, rho).unwrap();
                let values: Vec<f64> = RuleAssignment::four_combinations(n)
                    .iter()
                    .map(|r| combine_combined(&g, &x, &spec, r))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                for v in &values {
                    worst = worst.max((v - values[0]).abs());
                }
                count += 1;
            }
        }
    }
    check(
        worst <= 1e-12,
        format!("{count} instances, max spread across rules {worst:.1e}"),
    )
}

fn precision_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(404);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let sigmas: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let rho = rng.random_range(0.0..0.95);
        let closed = precision_matrix_closed_form(&sigmas, rho).map_err(|e| e.to_string())?;
        let cov = CovarianceSpec::heterogeneous(sigmas, rho).unwrap().covariance_matrix();
        let numeric: DMatrix<f64> = cov.try_inverse().ok_or("LU inverse failed")?;
        let err = (&closed - &numeric).abs().max();
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && secs < 1.0,
        format!("max elementwise error {worst:.1e}, {secs:.3}s"),
    )
}

fn fixed_config(topology: Topology, n: usize, sigma2: f64, rho: f64, replicates: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        theta: 3.0,
        cov: CovModel::Equi { sigma2, rho },
        topology,
        n_values: vec![n],
        replicates,
        graph_replicates: 1,
        rules: RulePattern::default(),
        master_seed: seed,
    }
}

fn star_variance() -> Outcome {
    let start = Instant::now();
    let res =
        run_with_threads(&fixed_config(Topology::Star, 10, 1.0, 0.3, 100_000, 505), 1).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let row = &res.rows[0];
    let target = star_bias_variance(10, 1.0, 0.3).unwrap();
    let se = normal_variance_se(target, row.replicates_used);
    let z = (row.var_bias - target) / se;
    check(
        z.abs() < 3.0 && (target - 0.1008).abs() < 1e-12 && secs < 10.0,
        format!(
            "var {:.6} vs {target:.4} (se {se:.2e}, z {z:+.2}), {secs:.2}s",
            row.var_bias
        ),
    )
}

fn line_variance() -> Outcome {
    let res =
        run_with_threads(&fixed_config(Topology::Line, 10, 1.0, 0.0, 100_000, 606), 1).map_err(|e| e.to_string())?;
    let row = &res.rows[0];
    let target = 1.0 / 900.0;
    let se = normal_variance_se(target, row.replicates_used);
    let z = (row.var_bias - target) / se;
    check(
        z.abs() < 3.0 && (row.analytic_var - target).abs() < 1e-15,
        format!("var {:.4e} vs {target:.4e} (se {se:.1e}, z {z:+.2})", row.var_bias),
    )
}

/// Zero is checked at rounding level: absolute 1e-12 for model-scale
/// forecasts, and relative to max |x| for forecasts stretched 50x.
fn regular_zero_bias() -> Outcome {
    let mut worst_abs = 0.0f64;
    let mut worst_rel = 0.0f64;
    for (name, g) in [
        ("ring-7", make_ring(7).unwrap()),
        ("ring-40", make_ring(40).unwrap()),
        ("complete-6", make_complete(6).unwrap()),
        ("complete-25", make_complete(25).unwrap()),
    ] {
        let n = g.n();
        for rho in [0.0, 0.5] {
            let spec = CovarianceSpec::equicorrelated(n, 1.3, rho).unwrap();
            let sampler = ErrorSampler::new(&spec).unwrap();
            for rep in 0..2000u64 {
                let e = sampler.sample_seeded(derive_seed(707, &[n as u64, rep]));
                for (scale, relative) in [(1.0, false), (50.0, true)] {
                    let x: Vec<f64> = e.iter().map(|e| 3.0 + scale * e).collect();
                    let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    for r in RuleAssignment::four_combinations(n) {
                        let b = network_bias(&g, &x, &spec, &r).map_err(|e| format!("{name}: {e}"))?;
                        if relative {
                            worst_rel = worst_rel.max(b.abs() / x_max);
                        } else {
                            worst_abs = worst_abs.max(b.abs());
                        }
                    }
                }
            }
        }
    }
    let mut max_var = 0.0f64;
    for topology in [Topology::Ring, Topology::Complete] {
        let res = run_with_threads(&fixed_config(topology, 12, 1.0, 0.2, 20_000, 708), 1).map_err(|e| e.to_string())?;
        max_var = max_var.max(res.rows[0].var_bias);
    }
    check(
        worst_abs <= 1e-12 && worst_rel <= 1e-13 && max_var <= 1e-20,
        format!(
            "max |bias| {worst_abs:.1e} at model scale, {worst_rel:.1e} relative at 50x; max var_bias {max_var:.1e}"
        ),
    )
}

fn special_functions() -> Outcome {
    let ei1 = exponential_integral(1.0).map_err(|e| e.to_string())?;
    let ei_err = (ei1 - 1.895_117_816_3).abs();
    let mut worst = 0.0f64;
    for lambda in [0.5, 1.0, 2.0, 5.0, 10.0, 50.0] {
        // Direct E[1/d | d > 0] for Poisson(λ).
        let mut log_pmf = -lambda;
        let mut sum = 0.0;
        for d in 1..2000 {
            log_pmf += f64::ln(lambda) - f64::ln(d as f64);
            sum += log_pmf.exp() / d as f64;
        }
        let oracle = sum / (1.0 - (-lambda).exp());
        let k = k_factor(lambda).map_err(|e| e.to_string())?;
        worst = worst.max(((k - oracle) / oracle).abs());
    }
    check(
        ei_err <= 1e-9 && worst <= 1e-8,
        format!("Ei(1) error {ei_err:.1e}; K max relative error {worst:.1e}"),
    )
}

fn poisson_sweep_config() -> ExperimentConfig {
    ExperimentConfig {
        theta: 3.0,
        cov: CovModel::Equi { sigma2: 1.2, rho: 0.0 },
        topology: Topology::Poisson { mean_degree: 5.0 },
        n_values: vec![25, 50, 100, 200, 400],
        replicates: 500,
        graph_replicates: 200,
        rules: RulePattern::default(),
        master_seed: 2024,
    }
}

/// Runs the reference Poisson sweep once; the three gates share the result.
fn poisson_sweep() -> Vec<(&'static str, Outcome)> {
    let start = Instant::now();
    let res = match run_with_threads(&poisson_sweep_config(), 1) {
        Ok(r) => r,
        Err(e) => {
            let msg = Err(e.to_string());
            return vec![("AC-10a", msg.clone()), ("AC-10b", msg.clone()), ("AC-10c", msg)];
        }
    };
    let secs = start.elapsed().as_secs_f64();
    for r in &res.rows {
        println!(
            "         n={:<4} mean={:+.2e} se_mean={:.1e} var={:.3e} analytic={:.3e} ratio={:.3}",
            r.n,
            r.mean_bias,
            r.se_mean,
            r.var_bias,
            r.analytic_var,
            r.var_bias / r.analytic_var
        );
    }
    let worst_z = res
        .rows
        .iter()
        .map(|r| (r.mean_bias / r.se_mean).abs())
        .fold(0.0, f64::max);
    let a = check(
        worst_z < 3.0 && secs < 300.0,
        format!("max |mean|/se_mean = {worst_z:.2}; sweep took {secs:.1}s single-threaded"),
    );
    let decreasing = res.rows.windows(2).all(|w| w[1].var_bias < w[0].var_bias);
    let b = check(
        decreasing,
        format!(
            "var_bias {:?}",
            res.rows
                .iter()
                .map(|r| format!("{:.2e}", r.var_bias))
                .collect::<Vec<_>>()
        ),
    );
    let worst_ratio = res
        .rows
        .iter()
        .filter(|r| r.n >= 100)
        .map(|r| r.var_bias / r.analytic_var)
        .fold(f64::NAN, |acc: f64, x| {
            if acc.is_nan() || (x - 1.0).abs() > (acc - 1.0).abs() {
                x
            } else {
                acc
            }
        });
    let c = check(
        (worst_ratio - 1.0).abs() <= 0.5,
        format!("worst var_bias/analytic at n >= 100: {worst_ratio:.3} (band 0.5..1.5)"),
    );
    vec![("AC-10a", a), ("AC-10b", b), ("AC-10c", c)]
}

fn dm_precision_bound() -> Outcome {
    let mut violations = 0;
    for (sigma2, rho) in [(1.0, 0.5), (1.2, 0.1), (4.0, 0.9), (0.3, 0.01)] {
        let bound = 1.0 / (sigma2 * rho);
        let mut prev = 0.0;
        let mut n = 1usize;
        while n <= 1_000_000 {
            let p = dm_posterior_precision(n, sigma2, rho).map_err(|e| e.to_string())?;
            if p <= prev || p > bound + 1e-9 {
                violations += 1;
            }
            prev = p;
            n = if n < 1000 { n + 1 } else { n + n / 10 };
        }
        let last = dm_posterior_precision(1_000_000, sigma2, rho).unwrap();
        if last > bound + 1e-9 {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} monotonicity/bound violations"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        fixed_config(Topology::Star, 15, 1.0, 0.3, 20_000, 909),
        ExperimentConfig {
            n_values: vec![30, 60],
            replicates: 200,
            graph_replicates: 20,
            ..poisson_sweep_config()
        },
        ExperimentConfig {
            cov: CovModel::Equi { sigma2: 2.0, rho: 0.4 },
            rules: RulePattern("B|B".parse().unwrap()),
            ..fixed_config(Topology::Line, 9, 2.0, 0.4, 5_000, 910)
        },
    ];
    let mut files = 0;
    for (k, cfg) in configs.iter().enumerate() {
        let mut reference: Option<Vec<u8>> = None;
        for threads in [1, 4, 8, 4] {
            let res: SweepResult = run_with_threads(cfg, threads).map_err(|e| e.to_string())?;
            let path = dir.path().join(format!("c{k}-t{threads}.csv"));
            netpool::montecarlo::write_results(&res, &path).map_err(|e| e.to_string())?;
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            files += 1;
            match &reference {
                None => reference = Some(bytes),
                Some(r) if *r != bytes => return Err(format!("config {k}: CSV differs at {threads} threads")),
                _ => {}
            }
        }
    }
    Ok(format!("{files} CSVs byte-identical across thread counts 1, 4, 8"))
}

fn main() {
    let mut results: Vec<(&str, &str, Outcome)> = Vec::new();
    let simple: [Criterion; 9] = [
        ("AC-01", "three-expert golden cases", three_expert_cases),
        ("AC-02", "attention centrality", attention),
        ("AC-03", "exact bias identity", bias_identity),
        ("AC-04", "Bayesian pooling collapse", bayes_collapse),
        ("AC-05", "precision-matrix oracle", precision_oracle),
        ("AC-06", "star variance, 1e5 replicates", star_variance),
        ("AC-07", "line variance, 1e5 replicates", line_variance),
        ("AC-08", "regular networks: zero bias", regular_zero_bias),
        ("AC-09", "special functions", special_functions),
    ];
    for (id, name, f) in simple {
        let outcome = f();
        report(id, name, &outcome);
        results.push((id, name, outcome));
    }
    for (id, outcome) in poisson_sweep() {
        let name = match id {
            "AC-10a" => "random-graph sweep: mean bias zero",
            "AC-10b" => "random-graph sweep: variance decreasing",
            _ => "random-graph sweep: variance within 50% of closed form",
        };
        report(id, name, &outcome);
        results.push((id, name, outcome));
    }
    for (id, name, f) in [
        (
            "AC-11",
            "decision-maker precision bound",
            dm_precision_bound as fn() -> Outcome,
        ),
        ("AC-12", "determinism across thread counts", determinism),
    ] {
        let outcome = f();
        report(id, name, &outcome);
        results.push((id, name, outcome));
    }
    let failed: Vec<_> = results
        .iter()
        .filter(|(_, _, o)| o.is_err())
        .map(|(id, _, _)| *id)
        .collect();
    println!(
        "\nacceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn report(id: &str, name: &str, outcome: &Outcome) {
    match outcome {
        Ok(detail) => println!("PASS {id} {name}: {detail}"),
        Err(detail) => println!("FAIL {id} {name}: {detail}"),
    }
}
