//! Network bias, attention centrality and closed-form bias variances for
//! fixed networks.
//!
//! Under all-simple-average rules the bias of the decision-maker's pooled
//! forecast is exactly `(1/n) Σᵢ αᵢ εᵢ`, where `αᵢ = Σ_{j∈Nᵢ} 1/dⱼ − 1` is
//! the attention centrality of expert `i`. Its variance therefore depends on
//! the network only through the `αᵢ`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::pooling::{Pooler, RuleAssignment};
use crate::stats::CovarianceSpec;

/// Absolute tolerance below which an attention value counts as zero.
pub const ZERO_ATTENTION_TOL: f64 = 1e-12;

/// Decision-maker's pooled value with expert communication minus its value
/// without: `dm_rule(xʳ) − dm_rule(x)`.
pub fn network_bias(g: &Graph, x: &[f64], spec: &CovarianceSpec, r: &RuleAssignment) -> Result<f64> {
    Pooler::for_rules(spec, r)?.network_bias(g, x, r)
}

impl Pooler {
    pub fn network_bias(&self, g: &Graph, x: &[f64], r: &RuleAssignment) -> Result<f64> {
        let with = self.combine_combined(g, x, r)?;
        let without = self.dm(r.dm_rule, x)?;
        Ok(with - without)
    }
}

/// Per-expert attention centrality. Sums to zero on every network.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionVector(pub Vec<f64>);

impl AttentionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `(1/n) Σᵢ αᵢ εᵢ`.
    pub fn weighted_error(&self, errors: &[f64]) -> Result<f64> {
        if errors.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} errors for {} attention values",
                errors.len(),
                self.len()
            )));
        }
        let s: f64 = self.0.iter().zip(errors).map(|(a, e)| a * e).sum();
        Ok(s / self.len() as f64)
    }

    /// CSV with header `node,alpha`, 1-based nodes, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,alpha\n");
        for (i, a) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{},{:?}", i + 1, a);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `αᵢ = Σ_{j∈Nᵢ} 1/dⱼ − 1` with self-inclusive neighbourhoods and degrees.
pub fn attention_centrality(g: &Graph) -> AttentionVector {
    let inv_deg: Vec<f64> = g.degrees().iter().map(|&d| 1.0 / d as f64).collect();
    AttentionVector(
        (0..g.n())
            .map(|i| g.neighbors(i).iter().map(|&j| inv_deg[j]).sum::<f64>() - 1.0)
            .collect(),
    )
}

/// Variance of the network bias on a fixed network under common variance
/// and correlation:
///
/// `(σ²/n) [ (1/n) Σ αᵢ² + (2ρ/n) Σᵢ Σ_{j>i} αᵢ αⱼ ]`
pub fn bias_variance_from_alpha(alphas: &AttentionVector, sigma2: f64, rho: f64, n: usize) -> f64 {
    let a = &alphas.0;
    let nf = n as f64;
    let squares: f64 = a.iter().map(|v| v * v).sum();
    let mut cross = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            cross += a[i] * a[j];
        }
    }
    sigma2 / nf * (squares / nf + 2.0 * rho / nf * cross)
}

/// Same quantity using `Σ αᵢ = 0`: `σ² (1−ρ) Σ αᵢ² / n²`.
pub fn bias_variance_simplified(alphas: &AttentionVector, sigma2: f64, rho: f64, n: usize) -> f64 {
    let nf = n as f64;
    sigma2 * (1.0 - rho) * alphas.sum_of_squares() / (nf * nf)
}

/// `σ² (n−2)² (n−1) (1−ρ) / (4n³)`.
pub fn star_bias_variance(n: usize, sigma2: f64, rho: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("star variance needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    Ok(sigma2 / (4.0 * nf.powi(3)) * (nf - 2.0).powi(2) * (nf - 1.0) * (1.0 - rho))
}

/// `σ² (1−ρ) / (9n²)`, valid for `n >= 4`.
pub fn line_bias_variance(n: usize, sigma2: f64, rho: f64) -> Result<f64> {
    if n < 4 {
        return Err(Error::Domain(format!("line variance needs n >= 4, got {n}")));
    }
    let nf = n as f64;
    Ok(sigma2 / (9.0 * nf * nf) * (1.0 - rho))
}

/// Decision-maker's posterior precision from `n` equicorrelated forecasts,
/// `n / (σ² (1 + (n−1)ρ))`. Bounded by `1/(σ²ρ)` when `ρ > 0`.
pub fn dm_posterior_precision(n: usize, sigma2: f64, rho: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("precision needs n >= 1".into()));
    }
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::Domain(format!("sigma2 = {sigma2} must be > 0")));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    let nf = n as f64;
    Ok(nf / (sigma2 * (1.0 + (nf - 1.0) * rho)))
}

/// True when every attention value is zero (within [`ZERO_ATTENTION_TOL`]).
/// Holds on every regular network.
pub fn is_zero_attention_structure(g: &Graph) -> bool {
    attention_centrality(g).max_abs() <= ZERO_ATTENTION_TOL
}

/// Random search for non-regular networks with zero attention everywhere.
/// Returns every hit among `trials` samples of `G(n, p)`. An empty result is
/// not evidence that none exist.
pub fn search_irregular_zero_attention(n: usize, p: f64, trials: usize, seed: u64) -> Result<Vec<Graph>> {
    let params = crate::graph::DegreeParams::new(n, p)?;
    let mut hits = Vec::new();
    for t in 0..trials {
        let g = crate::graph::sample_poisson_graph(params, crate::rng::derive_seed(seed, &[t as u64]))?;
        let degrees = g.degrees();
        let regular = degrees.iter().all(|&d| d == degrees[0]);
        if !regular && is_zero_attention_structure(&g) {
            hits.push(g);
        }
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_complete, make_d_regular, make_line, make_ring, make_star};
    use crate::pooling::Rule;
    use approx::assert_abs_diff_eq;

    fn assert_vec(a: &AttentionVector, expected: &[f64]) {
        assert_eq!(a.len(), expected.len());
        for (x, y) in a.0.iter().zip(expected) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-15);
        }
    }

    #[test]
    fn three_expert_bias() {
        let g = make_line(3).unwrap();
        let spec = CovarianceSpec::equicorrelated(3, 1.0, 0.0).unwrap();
        let r = RuleAssignment::all_simple(3);
        for (x, b) in [
            ([1.0, 5.0, 3.0], 1.0 / 3.0),
            ([1.0, 3.0, 5.0], 0.0),
            ([3.0, 1.0, 5.0], -1.0 / 3.0),
        ] {
            assert_abs_diff_eq!(network_bias(&g, &x, &spec, &r).unwrap(), b, epsilon = 1e-12);
        }
    }

    #[test]
    fn attention_examples() {
        // Star centre is node 0 here.
        assert_vec(
            &attention_centrality(&make_star(3).unwrap()),
            &[2.0 / 6.0, -1.0 / 6.0, -1.0 / 6.0],
        );
        assert_vec(
            &attention_centrality(&make_line(3).unwrap()),
            &[-1.0 / 6.0, 2.0 / 6.0, -1.0 / 6.0],
        );
        assert_vec(
            &attention_centrality(&make_line(4).unwrap()),
            &[-1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, -1.0 / 6.0],
        );
        assert!(attention_centrality(&make_d_regular(8, 3).unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn variance_forms_agree() {
        let a = attention_centrality(&make_star(3).unwrap());
        assert_abs_diff_eq!(bias_variance_from_alpha(&a, 1.0, 0.0, 3), 1.0 / 54.0, epsilon = 1e-15);
        let a = attention_centrality(&make_line(4).unwrap());
        assert_abs_diff_eq!(bias_variance_from_alpha(&a, 1.0, 0.0, 4), 1.0 / 144.0, epsilon = 1e-15);
        let a = attention_centrality(&make_ring(7).unwrap());
        assert_eq!(bias_variance_from_alpha(&a, 2.0, 0.3, 7), 0.0);

        for n in 3..30 {
            for rho in [0.0, 0.3, 0.9] {
                let a = attention_centrality(&make_star(n).unwrap());
                let full = bias_variance_from_alpha(&a, 1.3, rho, n);
                assert_abs_diff_eq!(full, bias_variance_simplified(&a, 1.3, rho, n), epsilon = 1e-14);
                assert_abs_diff_eq!(full, star_bias_variance(n, 1.3, rho).unwrap(), epsilon = 1e-14);
                if n >= 4 {
                    let a = attention_centrality(&make_line(n).unwrap());
                    let full = bias_variance_from_alpha(&a, 1.3, rho, n);
                    assert_abs_diff_eq!(full, line_bias_variance(n, 1.3, rho).unwrap(), epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn star_closed_form() {
        // 64 * 9 * 0.7 / 4000
        assert_abs_diff_eq!(star_bias_variance(10, 1.0, 0.3).unwrap(), 0.1008, epsilon = 1e-15);
        assert_abs_diff_eq!(star_bias_variance(3, 1.0, 0.0).unwrap(), 1.0 / 54.0, epsilon = 1e-15);
        assert_eq!(star_bias_variance(12, 1.0, 1.0).unwrap(), 0.0);
        assert!(star_bias_variance(2, 1.0, 0.0).is_err());
        let mut prev = 0.0;
        for n in 3..500 {
            let v = star_bias_variance(n, 1.0, 0.2).unwrap();
            assert!(v > prev);
            assert!(v < 0.25 * 0.8);
            prev = v;
        }
        assert_abs_diff_eq!(star_bias_variance(1_000_000, 1.0, 0.2).unwrap(), 0.2, epsilon = 1e-5);
    }

    #[test]
    fn line_closed_form() {
        assert_abs_diff_eq!(line_bias_variance(4, 1.0, 0.0).unwrap(), 1.0 / 144.0, epsilon = 1e-15);
        assert_abs_diff_eq!(line_bias_variance(10, 1.0, 0.0).unwrap(), 1.0 / 900.0, epsilon = 1e-15);
        assert_eq!(line_bias_variance(10, 1.0, 1.0).unwrap(), 0.0);
        assert!(line_bias_variance(3, 1.0, 0.0).is_err());
        let mut prev = f64::INFINITY;
        for n in 4..200 {
            let v = line_bias_variance(n, 1.0, 0.2).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn dm_precision() {
        assert_abs_diff_eq!(dm_posterior_precision(2, 1.0, 0.5).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(dm_posterior_precision(7, 1.0, 0.0).unwrap(), 7.0);
        assert_abs_diff_eq!(
            dm_posterior_precision(1_000_000, 1.0, 0.5).unwrap(),
            2.0,
            epsilon = 1e-5
        );
        assert!(dm_posterior_precision(0, 1.0, 0.5).is_err());
        assert!(dm_posterior_precision(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_attention_structures() {
        assert!(is_zero_attention_structure(&make_ring(6).unwrap()));
        assert!(is_zero_attention_structure(&make_complete(4).unwrap()));
        assert!(!is_zero_attention_structure(&make_star(5).unwrap()));
    }

    #[test]
    fn regular_networks_have_zero_bias_under_any_rules() {
        let g = make_ring(6).unwrap();
        let spec = CovarianceSpec::equicorrelated(6, 1.0, 0.4).unwrap();
        let x = [0.1, 4.0, -3.0, 2.2, 9.0, 1.0];
        for r in RuleAssignment::four_combinations(6) {
            assert_abs_diff_eq!(network_bias(&g, &x, &spec, &r).unwrap(), 0.0, epsilon = 1e-12);
        }
        let r = RuleAssignment::new(Rule::S, vec![Rule::S, Rule::B, Rule::S, Rule::B, Rule::B, Rule::S]);
        assert_abs_diff_eq!(network_bias(&g, &x, &spec, &r).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn attention_csv() {
        let a = attention_centrality(&make_line(4).unwrap());
        let csv = a.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("node,alpha"));
        let parsed: Vec<f64> = lines.map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
        assert_eq!(parsed, a.0);
    }

    #[test]
    fn irregular_search_skips_regular_hits() {
        // p = 1 always yields the complete graph, which is regular.
        assert!(search_irregular_zero_attention(6, 1.0, 5, 1).unwrap().is_empty());
        for g in search_irregular_zero_attention(8, 0.4, 200, 3).unwrap() {
            assert!(is_zero_attention_structure(&g));
        }
    }
}
