//! Structural augmentation with Adamic-Adar link scores.
//!
//! `AA(u, v) = Σ_{z ∈ N(u) ∩ N(v)} 1 / ln|N(z)|`. A pair scoring above the
//! threshold gains a structural edge of weight `AA`, or, if it is already a
//! content edge, has its weight raised to `1 + AA`. Every other content edge
//! keeps weight 1.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Neighborhoods, SimilarityGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Adamic-Adar threshold `T_aa`.
    pub threshold: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { threshold: 0.3 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        validate_threshold(self.threshold)
    }
}

fn validate_threshold(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "augment.threshold",
            format!("{t} must be nonnegative"),
        ))
    }
}

/// Where an augmented edge comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// A kNN edge whose pair did not clear the threshold (weight 1).
    Content,
    /// A new edge between non-adjacent, structurally similar nodes (weight `AA`).
    Structural,
    /// A kNN edge whose pair also cleared the threshold (weight `1 + AA`).
    Merged,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Content => "content",
            Provenance::Structural => "structural",
            Provenance::Merged => "merged",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "content" => Ok(Provenance::Content),
            "structural" => Ok(Provenance::Structural),
            "merged" => Ok(Provenance::Merged),
            other => Err(Error::param(
                "provenance",
                format!("unknown provenance `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub provenance: Provenance,
}

/// Undirected weighted graph `G_sa`; neighbor lists are sorted ascending and
/// `weights(v)[i]` belongs to `neighbors(v)[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    edges: Vec<WeightedEdge>,
    adjacency: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

impl AugmentedGraph {
    /// Builds from undirected edges; each unordered pair may appear once.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = WeightedEdge>) -> Result<Self> {
        let mut edges: Vec<WeightedEdge> = edges
            .into_iter()
            .map(|e| {
                if e.u > e.v {
                    WeightedEdge {
                        u: e.v,
                        v: e.u,
                        ..e
                    }
                } else {
                    e
                }
            })
            .collect();
        for e in &edges {
            if e.v >= n {
                return Err(Error::param(
                    "edge",
                    format!("node {} out of range for {n} nodes", e.v),
                ));
            }
            if e.u == e.v {
                return Err(Error::param("edge", format!("self-loop at node {}", e.u)));
            }
            if e.weight <= 0.0 || !e.weight.is_finite() {
                return Err(Error::param(
                    "edge",
                    format!("weight {} of ({}, {}) is not positive", e.weight, e.u, e.v),
                ));
            }
        }
        edges.sort_by_key(|e| (e.u, e.v));
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v))
        {
            return Err(Error::param(
                "edge",
                format!("pair ({}, {}) appears twice", w[0].u, w[0].v),
            ));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut weights = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        let adjacency = adjacency
            .into_iter()
            .zip(&mut weights)
            .map(|(mut list, w)| {
                list.sort_by_key(|&(v, _)| v);
                w.extend(list.iter().map(|&(_, weight)| weight));
                list.into_iter().map(|(v, _)| v).collect()
            })
            .collect();
        Ok(Self {
            edges,
            adjacency,
            weights,
        })
    }

    /// Every edge weighted 1 and marked as content.
    pub fn from_content(g: &SimilarityGraph) -> Self {
        Self::from_edges(
            g.n(),
            g.edges().map(|(u, v)| WeightedEdge {
                u,
                v,
                weight: 1.0,
                provenance: Provenance::Content,
            }),
        )
        .expect("a similarity graph is a valid augmented graph")
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// Edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weights(&self, v: usize) -> &[f64] {
        &self.weights[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let list = self.adjacency.get(u)?;
        list.binary_search(&v).ok().map(|i| self.weights[u][i])
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.edges
            .iter()
            .filter(|e| e.provenance == provenance)
            .count()
    }
}

impl Neighborhoods for AugmentedGraph {
    fn node_count(&self) -> usize {
        self.n()
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }
}

fn contribution(g: &SimilarityGraph, z: usize) -> f64 {
    // Any common neighbor has degree ≥ 2, so the logarithm is ≥ ln 2.
    1.0 / (g.degree(z) as f64).ln()
}

/// Adamic-Adar score of a pair, summing common neighbors in ascending order.
pub fn adamic_adar(g: &SimilarityGraph, u: usize, v: usize) -> Result<f64> {
    let n = g.n();
    if u >= n || v >= n {
        return Err(Error::param(
            "node",
            format!("pair ({u}, {v}) out of range for {n} nodes"),
        ));
    }
    if u == v {
        return Err(Error::param(
            "node pair",
            format!("Adamic-Adar needs two distinct nodes, got {u} twice"),
        ));
    }
    let (a, b) = (g.adjacency()[u].as_slice(), g.adjacency()[v].as_slice());
    let (mut i, mut j) = (0, 0);
    let mut score = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                score += contribution(g, a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(score)
}

/// Adamic-Adar scores of every pair `u < v` that shares a common neighbor,
/// sorted by pair. Each sum accumulates common neighbors in ascending order,
/// so values equal [`adamic_adar`] exactly.
pub fn scored_pairs(g: &SimilarityGraph) -> Vec<(usize, usize, f64)> {
    let n = g.n();
    let per_node: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], Vec::new()),
            |(score, touched), u| {
                for &z in &g.adjacency()[u] {
                    let c = contribution(g, z);
                    for &v in g.adjacency()[z].iter().filter(|&&v| v > u) {
                        if score[v] == 0.0 {
                            touched.push(v);
                        }
                        score[v] += c;
                    }
                }
                touched.sort_unstable();
                let out = touched.iter().map(|&v| (u, v, score[v])).collect();
                for &v in touched.iter() {
                    score[v] = 0.0;
                }
                touched.clear();
                out
            },
        )
        .collect();
    per_node.into_iter().flatten().collect()
}

/// Builds `G_sa` from `G_knn` with Adamic-Adar threshold `threshold`.
///
/// Only pairs with a common neighbor can score above zero, so the scan runs
/// over those pairs plus the existing edges rather than over all pairs.
pub fn structural_augment(g: &SimilarityGraph, threshold: f64) -> Result<AugmentedGraph> {
    validate_threshold(threshold)?;
    let scored = scored_pairs(g);
    let mut edges = Vec::with_capacity(g.edge_count() + scored.len());
    let mut content = g.edges().peekable();
    let mut scored = scored.into_iter().peekable();
    loop {
        // Merge the two pair-sorted streams.
        let next_content = content.peek().copied();
        let next_scored = scored.peek().map(|&(u, v, _)| (u, v));
        let (pair, exists, aa) = match (next_content, next_scored) {
            (None, None) => break,
            (Some(c), Some(s)) if c == s => {
                content.next();
                (c, true, scored.next().expect("peeked").2)
            }
            (Some(c), s) if s.is_none_or(|s| c < s) => {
                content.next();
                (c, true, 0.0)
            }
            _ => {
                let (u, v, aa) = scored.next().expect("peeked");
                ((u, v), false, aa)
            }
        };
        let (u, v) = pair;
        let edge = match (aa > threshold, exists) {
            (true, true) => Some((1.0 + aa, Provenance::Merged)),
            (true, false) => Some((aa, Provenance::Structural)),
            (false, true) => Some((1.0, Provenance::Content)),
            (false, false) => None,
        };
        if let Some((weight, provenance)) = edge {
            edges.push(WeightedEdge {
                u,
                v,
                weight,
                provenance,
            });
        }
    }
    AugmentedGraph::from_edges(g.n(), edges)
}

/// Writes `u v weight provenance` per undirected edge.
pub fn write_augmented(path: &Path, g: &AugmentedGraph) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for e in g.edges() {
            writeln!(out, "{} {} {} {}", e.u, e.v, e.weight, e.provenance)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_augmented`].
pub fn read_augmented(path: &Path, n: usize) -> Result<AugmentedGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = || format!("{}:{}", path.display(), lineno + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(location(), "expected `u v weight provenance`"));
        }
        let node = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::parse(location(), e.to_string()))
        };
        edges.push(WeightedEdge {
            u: node(fields[0])?,
            v: node(fields[1])?,
            weight: fields[2]
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::parse(location(), e.to_string()))?,
            provenance: fields[3]
                .parse()
                .map_err(|e: Error| Error::parse(location(), e.to_string()))?,
        });
    }
    AugmentedGraph::from_edges(n, edges)
}
