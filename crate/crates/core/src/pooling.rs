//! Pooling rules for experts and the decision-maker.
//!
//! Experts update once, simultaneously, from the original forecasts using
//! either the simple average over their self-inclusive neighbourhood (`S`)
//! or the Bayesian posterior mean under normal errors (`B`). The
//! decision-maker then pools the updated forecasts with its own rule.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::stats::CovarianceSpec;

/// A pooling rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Simple average.
    S,
    /// Bayesian (precision-weighted) posterior mean.
    B,
}

impl Rule {
    fn from_char(c: char) -> Option<Rule> {
        match c {
            'S' | 's' => Some(Rule::S),
            'B' | 'b' => Some(Rule::B),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Rule::S => 'S',
            Rule::B => 'B',
        }
    }
}

/// The decision-maker's rule together with one rule per expert.
///
/// Textual form: decision-maker first, a `|`, then one character per expert,
/// e.g. `S|SSB`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleAssignment {
    pub dm_rule: Rule,
    pub expert_rules: Vec<Rule>,
}

impl RuleAssignment {
    pub fn new(dm_rule: Rule, expert_rules: Vec<Rule>) -> Self {
        RuleAssignment { dm_rule, expert_rules }
    }

    /// Same rule for the decision-maker and all `n` experts.
    pub fn uniform(dm_rule: Rule, expert_rule: Rule, n: usize) -> Self {
        RuleAssignment::new(dm_rule, vec![expert_rule; n])
    }

    pub fn all_simple(n: usize) -> Self {
        RuleAssignment::uniform(Rule::S, Rule::S, n)
    }

    /// The four decision-maker/expert combinations with homogeneous experts:
    /// `S|S..`, `B|S..`, `S|B..`, `B|B..`.
    pub fn four_combinations(n: usize) -> [RuleAssignment; 4] {
        [
            RuleAssignment::uniform(Rule::S, Rule::S, n),
            RuleAssignment::uniform(Rule::B, Rule::S, n),
            RuleAssignment::uniform(Rule::S, Rule::B, n),
            RuleAssignment::uniform(Rule::B, Rule::B, n),
        ]
    }

    pub fn len(&self) -> usize {
        self.expert_rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expert_rules.is_empty()
    }

    pub fn uses_bayes(&self) -> bool {
        self.dm_rule == Rule::B || self.expert_rules.contains(&Rule::B)
    }
}

impl fmt::Display for RuleAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|", self.dm_rule.as_char())?;
        for r in &self.expert_rules {
            write!(f, "{}", r.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for RuleAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("rule assignment `{s}` is not of the form `S|SSB`"));
        let (dm, experts) = s.trim().split_once('|').ok_or_else(bad)?;
        let mut dm_chars = dm.chars();
        let dm_rule = dm_chars.next().and_then(Rule::from_char).ok_or_else(bad)?;
        if dm_chars.next().is_some() {
            return Err(bad());
        }
        let expert_rules = experts
            .chars()
            .map(Rule::from_char)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(bad)?;
        if expert_rules.is_empty() {
            return Err(bad());
        }
        Ok(RuleAssignment { dm_rule, expert_rules })
    }
}

/// Linear pooling weights for one agent. Unconstrained reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(pub Vec<f64>);

impl Weights {
    /// Uniform weights `1/dᵢ` on the self-inclusive neighbourhood of `i`.
    pub fn simple_average(g: &Graph, i: usize) -> Result<Self> {
        check_index(g, i)?;
        let d = g.degree(i) as f64;
        let mut w = vec![0.0; g.n()];
        for &j in g.neighbors(i) {
            w[j] = 1.0 / d;
        }
        Ok(Weights(w))
    }
}

/// `Σⱼ wⱼ xⱼ`.
pub fn linear_pool(weights: &Weights, x: &[f64]) -> Result<f64> {
    if weights.0.len() != x.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} forecasts",
            weights.0.len(),
            x.len()
        )));
    }
    Ok(weights.0.iter().zip(x).map(|(w, x)| w * x).sum())
}

pub fn simple_average_dm(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Shape("cannot average an empty forecast vector".into()));
    }
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

fn check_index(g: &Graph, i: usize) -> Result<()> {
    if i >= g.n() {
        return Err(Error::Shape(format!("expert {} outside 1..={}", i + 1, g.n())));
    }
    Ok(())
}

fn check_dims(g: &Graph, x: &[f64]) -> Result<()> {
    if x.len() != g.n() {
        return Err(Error::Shape(format!(
            "{} forecasts for a network of {} experts",
            x.len(),
            g.n()
        )));
    }
    Ok(())
}

/// Mean of `x` over the self-inclusive neighbourhood of expert `i` (0-based).
pub fn simple_average_expert(g: &Graph, i: usize, x: &[f64]) -> Result<f64> {
    check_index(g, i)?;
    check_dims(g, x)?;
    Ok(neighborhood_mean(g, i, x))
}

fn neighborhood_mean(g: &Graph, i: usize, x: &[f64]) -> f64 {
    let nb = g.neighbors(i);
    nb.iter().map(|&j| x[j]).sum::<f64>() / nb.len() as f64
}

/// Posterior mean and variance of the truth for an agent who pools the
/// forecasts indexed by `members` with precision matrix `precision`:
/// `(m'Px / m'Pm, 1 / m'Pm)` where `m` is the membership indicator.
fn bayes_over(precision: &DMatrix<f64>, members: &[usize], x: &[f64]) -> Result<(f64, f64)> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &j in members {
        for &k in members {
            let p = precision[(j, k)];
            num += p * x[k];
            den += p;
        }
    }
    if den.is_nan() || den <= 0.0 {
        return Err(Error::Numeric(format!("non-positive pooled precision {den}")));
    }
    Ok((num / den, 1.0 / den))
}

/// Decision-maker's Bayesian pool over all forecasts: `(1'Σ⁻¹x / 1'Σ⁻¹1, 1 / 1'Σ⁻¹1)`.
pub fn bayes_pool_dm(x: &[f64], spec: &CovarianceSpec) -> Result<(f64, f64)> {
    Pooler::new(spec)?.bayes_dm(x)
}

/// Expert `i`'s Bayesian pool over its self-inclusive neighbourhood.
pub fn bayes_pool_expert(g: &Graph, i: usize, x: &[f64], spec: &CovarianceSpec) -> Result<(f64, f64)> {
    check_index(g, i)?;
    Pooler::new(spec)?.bayes_expert(g, i, x)
}

/// One simultaneous update round: expert `i` reports its pooled forecast
/// under `r.expert_rules[i]`.
pub fn combined_forecasts(g: &Graph, x: &[f64], spec: &CovarianceSpec, r: &RuleAssignment) -> Result<Vec<f64>> {
    Pooler::for_rules(spec, r)?.combined(g, x, r)
}

/// The decision-maker's rule applied to the combined forecasts.
pub fn combine_combined(g: &Graph, x: &[f64], spec: &CovarianceSpec, r: &RuleAssignment) -> Result<f64> {
    Pooler::for_rules(spec, r)?.combine_combined(g, x, r)
}

/// Pooling with a precomputed precision matrix, for repeated evaluation on
/// the same covariance.
#[derive(Debug, Clone)]
pub struct Pooler {
    dim: usize,
    precision: Option<DMatrix<f64>>,
}

impl Pooler {
    pub fn new(spec: &CovarianceSpec) -> Result<Self> {
        Ok(Pooler {
            dim: spec.dim(),
            precision: Some(spec.precision_matrix()?),
        })
    }

    /// Skips the precision matrix when `r` uses no Bayesian rule.
    pub fn for_rules(spec: &CovarianceSpec, r: &RuleAssignment) -> Result<Self> {
        if r.uses_bayes() {
            Pooler::new(spec)
        } else {
            spec.validate()?;
            Ok(Pooler {
                dim: spec.dim(),
                precision: None,
            })
        }
    }

    fn precision(&self) -> Result<&DMatrix<f64>> {
        self.precision
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("pooler built without a precision matrix".into()))
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "{} forecasts for a covariance of dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn bayes_dm(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_len(x)?;
        let p = self.precision()?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, col) in p.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            num += s * x[k];
            den += s;
        }
        if den.is_nan() || den <= 0.0 {
            return Err(Error::Numeric(format!("non-positive pooled precision {den}")));
        }
        Ok((num / den, 1.0 / den))
    }

    pub fn bayes_expert(&self, g: &Graph, i: usize, x: &[f64]) -> Result<(f64, f64)> {
        check_index(g, i)?;
        check_dims(g, x)?;
        self.check_len(x)?;
        bayes_over(self.precision()?, g.neighbors(i), x)
    }

    pub fn dm(&self, rule: Rule, x: &[f64]) -> Result<f64> {
        match rule {
            Rule::S => simple_average_dm(x),
            Rule::B => self.bayes_dm(x).map(|(m, _)| m),
        }
    }

    pub fn combined(&self, g: &Graph, x: &[f64], r: &RuleAssignment) -> Result<Vec<f64>> {
        check_dims(g, x)?;
        self.check_len(x)?;
        if r.len() != g.n() {
            return Err(Error::Shape(format!(
                "{} expert rules for a network of {} experts",
                r.len(),
                g.n()
            )));
        }
        r.expert_rules
            .iter()
            .enumerate()
            .map(|(i, rule)| match rule {
                Rule::S => Ok(neighborhood_mean(g, i, x)),
                Rule::B => bayes_over(self.precision()?, g.neighbors(i), x).map(|(m, _)| m),
            })
            .collect()
    }

    pub fn combine_combined(&self, g: &Graph, x: &[f64], r: &RuleAssignment) -> Result<f64> {
        let combined = self.combined(g, x, r)?;
        self.dm(r.dm_rule, &combined)
    }
}
