//! Undirected k-nearest-neighbor similarity graph over embedded items.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Read access to per-node neighbor lists (sorted ascending, no self entries).
pub trait Neighborhoods {
    fn node_count(&self) -> usize;
    fn neighbors(&self, v: usize) -> &[usize];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::param("metric", format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => f.write_str("euclidean"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    /// Nearest neighbors linked per node before symmetrization.
    pub k: usize,
    pub metric: Metric,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 6,
            metric: Metric::Euclidean,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::param("graph.k", "must be at least 1"));
        }
        Ok(())
    }
}

/// Undirected, unweighted graph with sorted adjacency lists and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityGraph {
    adjacency: Vec<Vec<usize>>,
}

impl SimilarityGraph {
    /// Builds a graph from an edge list. Duplicate and reversed pairs collapse.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::param(
                    "edge",
                    format!("({u}, {v}) out of range for {n} nodes"),
                ));
            }
            if u == v {
                return Err(Error::param("edge", format!("self-loop on node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Each undirected edge once as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }
}

impl Neighborhoods for SimilarityGraph {
    fn node_count(&self) -> usize {
        self.n()
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }
}

/// Links every node to its `k` nearest other nodes; the edge set is the symmetric union.
///
/// Exact search over all pairs. Distance ties go to the smaller node index.
pub fn build_knn_graph(x: &EmbeddingMatrix, k: usize, metric: Metric) -> Result<SimilarityGraph> {
    let n = x.n_items();
    if n < 2 {
        return Err(Error::param(
            "graph",
            format!("need at least 2 nodes, got {n}"),
        ));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::param("k", format!("{k} is outside [1, {}]", n - 1)));
    }
    let rows: Vec<Vec<f64>> = x.as_array().outer_iter().map(|r| r.to_vec()).collect();
    let candidates: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .filter(|&u| u != v)
                .map(|u| (metric.distance(&rows[v], &rows[u]), u))
                .collect();
            dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
            dist.into_iter().map(|(_, u)| u).collect()
        })
        .collect();
    SimilarityGraph::from_edges(
        n,
        candidates
            .into_iter()
            .enumerate()
            .flat_map(|(v, list)| list.into_iter().map(move |u| (v, u))),
    )
}

/// Dense symmetric 0/1 adjacency matrix with zero diagonal.
pub fn adjacency_matrix(g: &SimilarityGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for (u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    a
}

/// Writes `u v 1` per undirected edge.
pub fn write_edge_list(path: &Path, g: &SimilarityGraph) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for (u, v) in g.edges() {
            writeln!(out, "{u} {v} 1")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a unit-weight edge list written by [`write_edge_list`].
pub fn read_edge_list(path: &Path, n: usize) -> Result<SimilarityGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = || format!("{}:{}", path.display(), lineno + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(location(), "expected `u v weight`"));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::parse(location(), e.to_string()))
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    SimilarityGraph::from_edges(n, edges)
}
