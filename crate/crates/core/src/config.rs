//! Experiment configuration and its JSON form.
//!
//! ```json
//! {
//!   "theta": 3.0,
//!   "cov": { "kind": "equi", "sigma2": 1.2, "rho": 0.0 },
//!   "topology": { "kind": "poisson", "mean_degree": 5.0 },
//!   "n_values": [25, 50, 100],
//!   "replicates": 500,
//!   "graph_replicates": 200,
//!   "rules": "S|S",
//!   "master_seed": 7
//! }
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, DegreeParams, Graph};
use crate::pooling::RuleAssignment;
use crate::stats::CovarianceSpec;

pub const DEFAULT_REPLICATES: usize = 500;
pub const DEFAULT_GRAPH_REPLICATES: usize = 200;

/// Error covariance, independent of the network size where possible.
#[derive(Debug, Clone, PartialEq)]
pub enum CovModel {
    Equi { sigma2: f64, rho: f64 },
    Hetero { sigmas: Vec<f64>, rho: f64 },
    General { matrix: Vec<Vec<f64>> },
}

impl CovModel {
    /// Covariance for `n` experts. Only `Equi` adapts to any `n`.
    pub fn spec_for(&self, n: usize) -> Result<CovarianceSpec> {
        let spec = match self {
            CovModel::Equi { sigma2, rho } => CovarianceSpec::Equicorrelated {
                n,
                sigma2: *sigma2,
                rho: *rho,
            },
            CovModel::Hetero { sigmas, rho } => {
                if sigmas.len() != n {
                    return Err(Error::config(
                        "cov.sigmas",
                        format!("has {} entries but n = {n}", sigmas.len()),
                    ));
                }
                CovarianceSpec::Heterogeneous {
                    sigmas: sigmas.clone(),
                    rho: *rho,
                }
            }
            CovModel::General { matrix } => {
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::config("cov.matrix", format!("must be {n}x{n}")));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                CovarianceSpec::General {
                    matrix: DMatrix::from_row_slice(n, n, &flat),
                }
            }
        };
        spec.validate().map_err(|e| Error::config(self.key(), e.to_string()))?;
        Ok(spec)
    }

    fn key(&self) -> &'static str {
        match self {
            CovModel::Equi { .. } => "cov.kind=equi",
            CovModel::Hetero { .. } => "cov.kind=hetero",
            CovModel::General { .. } => "cov.matrix",
        }
    }

    /// `(σ², ρ)` for the equicorrelated model.
    pub fn equi_params(&self) -> Option<(f64, f64)> {
        match self {
            CovModel::Equi { sigma2, rho } => Some((*sigma2, *rho)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    Star,
    Line,
    Ring,
    DRegular { d: usize },
    Complete,
    Poisson { mean_degree: f64 },
}

impl Topology {
    pub fn is_random(&self) -> bool {
        matches!(self, Topology::Poisson { .. })
    }

    /// Builds a deterministic topology on `n` nodes.
    pub fn build(&self, n: usize) -> Result<Graph> {
        match *self {
            Topology::Star => graph::make_star(n),
            Topology::Line => graph::make_line(n),
            Topology::Ring => graph::make_ring(n),
            Topology::DRegular { d } => graph::make_d_regular(n, d),
            Topology::Complete => graph::make_complete(n),
            Topology::Poisson { .. } => Err(Error::config("topology.kind", "poisson graphs are sampled, not built")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Topology::Star => "star",
            Topology::Line => "line",
            Topology::Ring => "ring",
            Topology::DRegular { .. } => "d_regular",
            Topology::Complete => "complete",
            Topology::Poisson { .. } => "poisson",
        }
    }

    pub fn parse(kind: &str, d: Option<usize>, mean_degree: Option<f64>) -> Result<Self> {
        Ok(match kind {
            "star" => Topology::Star,
            "line" => Topology::Line,
            "ring" => Topology::Ring,
            "complete" => Topology::Complete,
            "d_regular" | "d-regular" | "regular" => Topology::DRegular {
                d: d.ok_or_else(|| Error::config("topology.d", "required for d_regular"))?,
            },
            "poisson" => Topology::Poisson {
                mean_degree: mean_degree
                    .ok_or_else(|| Error::config("topology.mean_degree", "required for poisson"))?,
            },
            other => {
                return Err(Error::config(
                    "topology.kind",
                    format!("unknown topology `{other}` (star, line, ring, d_regular, complete, poisson)"),
                ))
            }
        })
    }
}

/// Decision-maker rule plus expert rules; a single expert rule applies to
/// every expert, otherwise the count must match `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulePattern(pub RuleAssignment);

impl RulePattern {
    pub fn resolve(&self, n: usize) -> Result<RuleAssignment> {
        let r = &self.0;
        match r.len() {
            1 => Ok(RuleAssignment::uniform(r.dm_rule, r.expert_rules[0], n)),
            len if len == n => Ok(r.clone()),
            len => Err(Error::config(
                "rules",
                format!("{len} expert rules do not match n = {n}"),
            )),
        }
    }
}

impl Default for RulePattern {
    fn default() -> Self {
        RulePattern(RuleAssignment::all_simple(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub theta: f64,
    pub cov: CovModel,
    pub topology: Topology,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub graph_replicates: usize,
    pub rules: RulePattern,
    pub master_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCov {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_degree: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    theta: f64,
    cov: RawCov,
    topology: RawTopology,
    n_values: Vec<usize>,
    #[serde(default)]
    replicates: Option<usize>,
    #[serde(default)]
    graph_replicates: Option<usize>,
    #[serde(default)]
    rules: Option<String>,
    #[serde(default)]
    master_seed: Option<u64>,
}

impl RawCov {
    fn into_model(self) -> Result<CovModel> {
        let rho = || self.rho.ok_or_else(|| Error::config("cov.rho", "missing"));
        let model = match self.kind.as_str() {
            "equi" => CovModel::Equi {
                sigma2: self.sigma2.ok_or_else(|| Error::config("cov.sigma2", "missing"))?,
                rho: rho()?,
            },
            "hetero" => CovModel::Hetero {
                sigmas: self
                    .sigmas
                    .clone()
                    .ok_or_else(|| Error::config("cov.sigmas", "missing"))?,
                rho: rho()?,
            },
            "general" => CovModel::General {
                matrix: self
                    .matrix
                    .clone()
                    .ok_or_else(|| Error::config("cov.matrix", "missing"))?,
            },
            other => {
                return Err(Error::config(
                    "cov.kind",
                    format!("unknown kind `{other}` (equi, hetero, general)"),
                ))
            }
        };
        match &model {
            CovModel::Equi { sigma2, rho } => {
                if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(Error::config("cov.sigma2", format!("{sigma2} must be > 0")));
                }
                check_rho(*rho)?;
            }
            CovModel::Hetero { sigmas, rho } => {
                if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(Error::config("cov.sigmas", "entries must be > 0"));
                }
                check_rho(*rho)?;
            }
            CovModel::General { .. } => {}
        }
        Ok(model)
    }

    fn from_model(model: &CovModel) -> Self {
        let mut raw = RawCov {
            kind: String::new(),
            sigma2: None,
            rho: None,
            sigmas: None,
            matrix: None,
        };
        match model {
            CovModel::Equi { sigma2, rho } => {
                raw.kind = "equi".into();
                raw.sigma2 = Some(*sigma2);
                raw.rho = Some(*rho);
            }
            CovModel::Hetero { sigmas, rho } => {
                raw.kind = "hetero".into();
                raw.sigmas = Some(sigmas.clone());
                raw.rho = Some(*rho);
            }
            CovModel::General { matrix } => {
                raw.kind = "general".into();
                raw.matrix = Some(matrix.clone());
            }
        }
        raw
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::config("cov.rho", format!("{rho} outside [0, 1)")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        ExperimentConfig::from_json_with_seed_fallback(text, 0)
    }

    /// Like [`from_json`](Self::from_json), using `seed` when the document
    /// has no `master_seed`.
    pub fn from_json_with_seed_fallback(text: &str, seed: u64) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            key: "<document>".into(),
            reason: e.to_string(),
        })?;
        let topology = Topology::parse(&raw.topology.kind, raw.topology.d, raw.topology.mean_degree)?;
        let rules = match &raw.rules {
            Some(s) => RulePattern(
                s.parse::<RuleAssignment>()
                    .map_err(|e| Error::config("rules", e.to_string()))?,
            ),
            None => RulePattern::default(),
        };
        let config = ExperimentConfig {
            theta: raw.theta,
            cov: raw.cov.into_model()?,
            topology,
            n_values: raw.n_values,
            replicates: raw.replicates.unwrap_or(DEFAULT_REPLICATES),
            graph_replicates: raw.graph_replicates.unwrap_or(DEFAULT_GRAPH_REPLICATES),
            rules,
            master_seed: raw.master_seed.unwrap_or(seed),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let (d, mean_degree) = match self.topology {
            Topology::DRegular { d } => (Some(d), None),
            Topology::Poisson { mean_degree } => (None, Some(mean_degree)),
            _ => (None, None),
        };
        let raw = RawConfig {
            theta: self.theta,
            cov: RawCov::from_model(&self.cov),
            topology: RawTopology {
                kind: self.topology.name().into(),
                d,
                mean_degree,
            },
            n_values: self.n_values.clone(),
            replicates: Some(self.replicates),
            graph_replicates: Some(self.graph_replicates),
            rules: Some(self.rules.0.to_string()),
            master_seed: Some(self.master_seed),
        };
        serde_json::to_string_pretty(&raw).expect("config serialises")
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::config("theta", "must be finite"));
        }
        if self.n_values.is_empty() {
            return Err(Error::config("n_values", "must not be empty"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be >= 1"));
        }
        if self.graph_replicates == 0 {
            return Err(Error::config("graph_replicates", "must be >= 1"));
        }
        for &n in &self.n_values {
            self.rules.resolve(n)?;
            self.cov.spec_for(n)?;
            match self.topology {
                Topology::Poisson { mean_degree } => {
                    if !(mean_degree > 0.0 && mean_degree.is_finite()) {
                        return Err(Error::config("topology.mean_degree", "must be > 0"));
                    }
                    DegreeParams::from_mean_degree(n, mean_degree)
                        .map_err(|e| Error::config("n_values", e.to_string()))?;
                    if self.cov.equi_params().is_none() {
                        return Err(Error::config("cov.kind", "poisson sweeps require cov.kind = equi"));
                    }
                }
                _ => {
                    self.topology
                        .build(n)
                        .map_err(|e| Error::config("n_values", format!("n = {n}: {e}")))?;
                }
            }
        }
        Ok(())
    }
}
