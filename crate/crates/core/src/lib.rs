//! Network bias in combined forecasts.
//!
//! Experts connected by a communication network each pool the forecasts of
//! their neighbours before a decision-maker pools the results. This crate
//! provides the pieces needed to study the bias that this prior sharing
//! induces in the decision-maker's combined forecast:
//!
//! - [`graph`]: adjacency with self-loops, classical topologies, the Poisson
//!   random graph and its degree distributions.
//! - [`stats`]: error covariance models, the closed-form equicorrelated
//!   precision matrix and reproducible multivariate normal draws.
//! - [`pooling`]: simple-average and Bayesian pooling for experts and the
//!   decision-maker, combined forecasts and their combination.
//! - [`bias`]: network bias, attention centrality and closed-form variances
//!   for fixed networks.
//! - [`random_graph`]: the exponential integral, the K-factor and expected
//!   bias variance on Poisson random graphs.
//! - [`montecarlo`]: seeded experiment harness and CSV output.

pub mod bias;
pub mod config;
pub mod error;
pub mod graph;
pub mod montecarlo;
pub mod pooling;
pub mod random_graph;
pub mod rng;
pub mod stats;

pub use bias::{attention_centrality, network_bias, AttentionVector};
pub use config::{ExperimentConfig, Topology};
pub use error::{Error, Result};
pub use graph::{DegreeParams, Graph};
pub use montecarlo::{SweepResult, SweepRow};
pub use pooling::{Rule, RuleAssignment};
pub use stats::{CovarianceSpec, ForecastDraw};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
