//! Communication networks among experts.
//!
//! A [`Graph`] is undirected and always carries a self-loop on every node, so
//! each expert belongs to its own neighbourhood and every self-inclusive
//! degree is at least one. The random-graph degree distributions in this
//! module follow the opposite convention and count neighbours *excluding*
//! self.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Undirected network with mandatory self-loops.
///
/// Nodes are indexed `0..n` internally; the edge-list format and all
/// user-facing output are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    /// Sorted self-inclusive neighbourhoods.
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from off-diagonal edges (0-based). Duplicates and
    /// self-loops in `edges` are ignored; every node gets its self-loop.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one node".into()));
        }
        let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Shape(format!(
                    "edge ({}, {}) out of range for n={n}",
                    i + 1,
                    j + 1
                )));
            }
            if i != j {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        Ok(Graph { neighbors })
    }

    /// Builds a graph from a dense 0/1 matrix. The matrix must be symmetric;
    /// the diagonal is forced to one.
    pub fn from_adjacency(adjacency: &DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Shape("adjacency must be square".into()));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if a != 0.0 && a != 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency entry ({}, {}) = {a} is not binary",
                        i + 1,
                        j + 1
                    )));
                }
                if a != adjacency[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if i < j && a == 1.0 {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Self-inclusive neighbourhood of `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Self-inclusive degree.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Off-diagonal edges `(i, j)` with `i < j`, 0-based, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Dense adjacency including the unit diagonal.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                a[(i, j)] = 1.0;
            }
        }
        a
    }

    /// Serializes to the edge-list format: `n=<int>` followed by one
    /// 1-based `i j` line per edge with `i < j`. Self-loops are implicit.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("expected `n=<int>` header, found `{header}`")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                let v: usize = tok
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("line {}: bad edge `{line}`", lineno + 1)))?;
                if v == 0 || v > n {
                    return Err(Error::Parse(format!("line {}: node {v} outside 1..={n}", lineno + 1)));
                }
                Ok(v - 1)
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing tokens", lineno + 1)));
            }
            edges.push((i, j));
        }
        Graph::from_edges(n, &edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Graph::from_edge_list(&text)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}

/// Star on `n >= 3` nodes with node 0 as the centre.
pub fn make_star(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("star needs n >= 3, got {n}")));
    }
    let edges: Vec<_> = (1..n).map(|j| (0, j)).collect();
    Graph::from_edges(n, &edges)
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn make_line(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("line needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (1..n).map(|j| (j - 1, j)).collect();
    Graph::from_edges(n, &edges)
}

/// Circulant `d`-regular graph (`d` counts neighbours excluding self): each
/// node links to its `d/2` nearest nodes on either side, plus the antipodal
/// node when `d` is odd.
pub fn make_d_regular(n: usize, d: usize) -> Result<Graph> {
    if d == 0 || d >= n {
        return Err(Error::Construction(format!(
            "d-regular needs 1 <= d < n, got n={n}, d={d}"
        )));
    }
    if (n * d) % 2 == 1 {
        return Err(Error::Construction(format!(
            "no {d}-regular graph on {n} nodes: n*d is odd"
        )));
    }
    let mut edges = Vec::with_capacity(n * d / 2);
    for i in 0..n {
        for k in 1..=d / 2 {
            edges.push((i, (i + k) % n));
        }
        if d % 2 == 1 && i < n / 2 {
            edges.push((i, i + n / 2));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Cycle on `n >= 3` nodes.
pub fn make_ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("ring needs n >= 3, got {n}")));
    }
    make_d_regular(n, 2)
}

pub fn make_complete(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidSize("complete graph needs n >= 1".into()));
    }
    let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    Graph::from_edges(n, &edges)
}

/// Parameters of the Poisson (Erdős–Rényi) random graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeParams {
    pub n: usize,
    pub p: f64,
}

impl DegreeParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("random graph needs n >= 1".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
        }
        Ok(DegreeParams { n, p })
    }

    /// Parameters with `p = mean_degree / (n - 1)`.
    pub fn from_mean_degree(n: usize, mean_degree: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!(
                "mean-degree parameterisation needs n >= 2, got {n}"
            )));
        }
        let p = mean_degree / (n - 1) as f64;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "mean degree {mean_degree} gives p = {p} > 1 at n = {n}; use n > {}",
                mean_degree.ceil()
            )));
        }
        Ok(DegreeParams { n, p })
    }

    /// `(n - 1) p`, excluding self.
    pub fn expected_degree(&self) -> f64 {
        (self.n - 1) as f64 * self.p
    }
}

/// Samples `G(n, p)`: every unordered pair is linked independently with
/// probability `p`, using a stream keyed by `seed`. Self-loops are added
/// afterwards.
pub fn sample_poisson_graph(params: DegreeParams, seed: u64) -> Result<Graph> {
    let DegreeParams { n, p } = DegreeParams::new(params.n, params.p)?;
    let mut rng = rng::stream(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

fn ln_choose(m: usize, k: usize) -> f64 {
    let k = k.min(m - k);
    (0..k).map(|t| ((m - t) as f64).ln() - ((t + 1) as f64).ln()).sum()
}

/// Probability that a node has exactly `d` neighbours (excluding self):
/// `C(n-1, d) p^d (1-p)^(n-1-d)`.
pub fn neighbor_count_pmf(params: DegreeParams, d: usize) -> Result<f64> {
    let DegreeParams { n, p } = DegreeParams::new(params.n, params.p)?;
    let m = n - 1;
    if d > m {
        return Err(Error::Domain(format!("degree {d} outside 0..={m}")));
    }
    if p == 0.0 {
        return Ok(if d == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if d == m { 1.0 } else { 0.0 });
    }
    let log = ln_choose(m, d) + d as f64 * p.ln() + (m - d) as f64 * (-p).ln_1p();
    Ok(log.exp())
}

/// Degree distribution of a node reached by following a random edge:
/// `P(d) d / <d>`.
pub fn neighbor_degree_pmf(params: DegreeParams, d: usize) -> Result<f64> {
    let params = DegreeParams::new(params.n, params.p)?;
    let mean = params.expected_degree();
    if mean <= 0.0 {
        return Err(Error::Domain(
            "size-biased degree distribution undefined when the mean degree is 0".into(),
        ));
    }
    Ok(neighbor_count_pmf(params, d)? * d as f64 / mean)
}
