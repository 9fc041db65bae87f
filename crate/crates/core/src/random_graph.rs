//! Asymptotic quantities for the Poisson random graph.
//!
//! The K-factor `K(λ) = E[1/d | d > 0]` for `d ~ Poisson(λ)` has the closed
//! form `e^{-λ}/(1 − e^{-λ}) · [Ei(λ) − ln λ − γ]`, and drives the expected
//! bias variance `σ²/n · (K(λ)(1 + λ) − 1)`.

use crate::error::{Error, Result};
use crate::graph::DegreeParams;
use crate::EULER_GAMMA;

/// Series/asymptotic crossover for [`exponential_integral`].
pub const EI_CROSSOVER: f64 = 40.0;

/// Inputs to the expected-variance approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticParams {
    /// `⟨d⟩`, expected neighbour count excluding self.
    pub mean_degree: f64,
    pub sigma2: f64,
    pub n: usize,
}

impl AsymptoticParams {
    pub fn new(mean_degree: f64, sigma2: f64, n: usize) -> Result<Self> {
        check_positive("mean degree", mean_degree)?;
        check_positive("sigma2", sigma2)?;
        if n < 2 {
            return Err(Error::Domain(format!("n = {n} must be >= 2")));
        }
        Ok(AsymptoticParams { mean_degree, sigma2, n })
    }

    pub fn from_degree_params(params: DegreeParams, sigma2: f64) -> Result<Self> {
        AsymptoticParams::new(params.expected_degree(), sigma2, params.n)
    }
}

fn check_positive(what: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("{what} = {x} must be positive and finite")));
    }
    Ok(())
}

/// `Σ_{k≥1} x^k / (k · k!)`, summed until terms stop contributing.
fn ei_power_series(x: f64) -> f64 {
    let mut power_over_fact = 1.0;
    let mut sum = 0.0;
    for k in 1..1000 {
        let kf = k as f64;
        power_over_fact *= x / kf;
        let term = power_over_fact / kf;
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `e^{-x} Ei(x) ≈ (1/x) Σ_{m≥0} m!/x^m`, truncated before the smallest term
/// starts to grow.
fn scaled_ei_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..1000 {
        let next = term * m as f64 / x;
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum / x
}

/// Exponential integral `Ei(x)` for `x > 0`: power series up to
/// [`EI_CROSSOVER`], divergent asymptotic expansion beyond.
pub fn exponential_integral(x: f64) -> Result<f64> {
    check_positive("Ei argument", x)?;
    if x <= EI_CROSSOVER {
        Ok(ei_series(x))
    } else {
        Ok(ei_asymptotic(x))
    }
}

/// `γ + ln x + Σ x^k/(k·k!)`.
pub fn ei_series(x: f64) -> f64 {
    EULER_GAMMA + x.ln() + ei_power_series(x)
}

/// `e^x/x · Σ m!/x^m`. Overflows to infinity beyond `x ≈ 709`.
pub fn ei_asymptotic(x: f64) -> f64 {
    x.exp() * scaled_ei_asymptotic(x)
}

/// `K(λ) = e^{-λ}/(1 − e^{-λ}) · [Ei(λ) − ln λ − γ]`, equal to `E[1/d | d > 0]`
/// for Poisson(λ) degrees.
pub fn k_factor(mean_degree: f64) -> Result<f64> {
    check_positive("mean degree", mean_degree)?;
    let lambda = mean_degree;
    let one_minus = -(-lambda).exp_m1();
    if lambda <= EI_CROSSOVER {
        // Ei(λ) − ln λ − γ is exactly the power series; no cancellation.
        Ok((-lambda).exp() * ei_power_series(lambda) / one_minus)
    } else {
        let e = (-lambda).exp();
        Ok((scaled_ei_asymptotic(lambda) - e * (lambda.ln() + EULER_GAMMA)) / one_minus)
    }
}

/// `E[1/dⱼ]` over the size-biased neighbour degree: `1/⟨d⟩`.
pub fn expected_recip_neighbor_degree(mean_degree: f64) -> Result<f64> {
    check_positive("mean degree", mean_degree)?;
    Ok(1.0 / mean_degree)
}

/// `E[1/dⱼ²]` over the size-biased neighbour degree: `K(⟨d⟩)/⟨d⟩`.
pub fn expected_recip_neighbor_degree_sq(mean_degree: f64) -> Result<f64> {
    Ok(k_factor(mean_degree)? / mean_degree)
}

/// `E[C(d, 2)] = C(n−1, 2) p²` for `d ~ Binomial(n−1, p)`.
pub fn expected_choose2(n: usize, p: f64) -> Result<f64> {
    DegreeParams::new(n, p)?;
    let m = (n - 1) as f64;
    Ok(m * (m - 1.0) / 2.0 * p * p)
}

/// Large-`n` approximation `⟨d⟩²/2` of [`expected_choose2`].
pub fn expected_choose2_approx(n: usize, p: f64) -> Result<f64> {
    let params = DegreeParams::new(n, p)?;
    let mean = params.expected_degree();
    Ok(mean * mean / 2.0)
}

/// `K(⟨d⟩) (1 + ⟨d⟩)`; tends to 1 as `⟨d⟩ → ∞`.
pub fn k_times_one_plus_d(mean_degree: f64) -> Result<f64> {
    Ok(k_factor(mean_degree)? * (1.0 + mean_degree))
}

/// Expected bias variance over Poisson random graphs,
/// `σ²/n · (K(⟨d⟩)(1 + ⟨d⟩) − 1)`.
pub fn expected_bias_variance_poisson(params: AsymptoticParams) -> Result<f64> {
    let AsymptoticParams { mean_degree, sigma2, n } =
        AsymptoticParams::new(params.mean_degree, params.sigma2, params.n)?;
    Ok(sigma2 / n as f64 * (k_times_one_plus_d(mean_degree)? - 1.0))
}
