//! Final classification over the augmented graph with randomized
//! neighborhoods: every epoch each node keeps at most `K` neighbors drawn by
//! edge weight, and attention runs over that sampled neighborhood plus the
//! node itself.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentedGraph;
use crate::corpus::{complement, Corpus, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::gat::{train_resampled, GatConfig, TrainingSet};
use crate::graph::Neighborhoods;
use crate::lp2::{PseudoLabels, DECISION_THRESHOLD};
use crate::seed;

/// Graph used for the closing prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalInference {
    /// One more sampled epoch graph, as during training.
    #[default]
    Sampled,
    /// The complete augmented graph.
    Full,
}

impl fmt::Display for FinalInference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FinalInference::Sampled => "sampled",
            FinalInference::Full => "full",
        })
    }
}

impl FromStr for FinalInference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(FinalInference::Sampled),
            "full" => Ok(FinalInference::Full),
            other => Err(Error::param(
                "final_inference",
                format!("expected `sampled` or `full`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    /// Neighbors kept per node and epoch (`K`).
    pub neighbors: usize,
    pub final_inference: FinalInference,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            neighbors: 5,
            final_inference: FinalInference::Sampled,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        validate_k(self.neighbors)
    }
}

fn validate_k(k: usize) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(Error::param("classify.neighbors", "must be at least 1"))
    }
}

/// Draws up to `k` distinct neighbors of `v`; each successive draw picks a
/// remaining neighbor with probability proportional to its edge weight.
/// Returns every neighbor, without touching `rng`, when `deg(v) ≤ k`.
/// The result is sorted ascending.
pub fn sample_neighbors<R: Rng + ?Sized>(
    g_sa: &AugmentedGraph,
    v: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    validate_k(k)?;
    if v >= g_sa.n() {
        return Err(Error::param(
            "node",
            format!("{v} out of range for {} nodes", g_sa.n()),
        ));
    }
    let neighbors = g_sa.neighbors(v);
    if neighbors.len() <= k {
        return Ok(neighbors.to_vec());
    }
    let weights = g_sa.weights(v);
    let picked = index::sample_weighted(rng, neighbors.len(), |i| weights[i], k)
        .map_err(|e| Error::param("edge weights", e.to_string()))?;
    let mut out: Vec<usize> = picked.into_iter().map(|i| neighbors[i]).collect();
    out.sort_unstable();
    Ok(out)
}

/// Directed per-epoch neighborhoods: `neighbors(v)` holds the nodes `v`
/// aggregates from in this epoch (besides itself).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochGraph {
    adjacency: Vec<Vec<usize>>,
}

impl EpochGraph {
    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }
}

impl Neighborhoods for EpochGraph {
    fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }
}

/// Samples every node's neighborhood in ascending node order from one stream.
pub fn epoch_graph<R: Rng + ?Sized>(
    g_sa: &AugmentedGraph,
    k: usize,
    rng: &mut R,
) -> Result<EpochGraph> {
    let adjacency = (0..g_sa.n())
        .map(|v| sample_neighbors(g_sa, v, k, rng))
        .collect::<Result<_>>()?;
    Ok(EpochGraph { adjacency })
}

/// Scores and labels for the unlabeled nodes, in ascending node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub nodes: Vec<usize>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Trains on `labeled ∪ ip` (interest) and `in_` (non-interest) with a fresh
/// epoch graph per epoch, then predicts every unlabeled node.
///
/// All neighbor sampling (training epochs, then the closing graph) comes from
/// one stream seeded by `seed`; parameter initialization uses `gat_config.seed`.
pub fn train_and_predict(
    g_sa: &AugmentedGraph,
    x: &EmbeddingMatrix,
    labeled: &[usize],
    pseudo: &PseudoLabels,
    config: ClassifyConfig,
    gat_config: GatConfig,
    seed: u64,
) -> Result<Predictions> {
    config.validate()?;
    let n = g_sa.n();
    if x.n_items() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {n} graph nodes",
            x.n_items()
        )));
    }
    let mut positives: Vec<usize> = labeled.iter().chain(&pseudo.ip).copied().collect();
    positives.sort_unstable();
    positives.dedup();
    let set = TrainingSet::from_classes(&positives, &pseudo.in_)?;
    if !set.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let mut rng = seed::rng(seed);
    let mut sampling_error = None;
    let trained = train_resampled(gat_config, x, &set, |_| {
        epoch_graph(g_sa, config.neighbors, &mut rng).unwrap_or_else(|e| {
            sampling_error.get_or_insert(e);
            EpochGraph {
                adjacency: vec![Vec::new(); n],
            }
        })
    })?;
    if let Some(e) = sampling_error {
        return Err(e);
    }
    let scores = match config.final_inference {
        FinalInference::Sampled => trained
            .model
            .predict(&epoch_graph(g_sa, config.neighbors, &mut rng)?, x)?,
        FinalInference::Full => trained.model.predict(g_sa, x)?,
    };

    let mut sorted_labeled = labeled.to_vec();
    sorted_labeled.sort_unstable();
    sorted_labeled.dedup();
    let nodes = complement(n, &sorted_labeled);
    let scores: Vec<f64> = nodes.iter().map(|&v| scores[v]).collect();
    let labels = scores
        .iter()
        .map(|&s| u8::from(s >= DECISION_THRESHOLD))
        .collect();
    Ok(Predictions {
        nodes,
        scores,
        labels,
    })
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord<'a> {
    #[serde(borrow)]
    id: std::borrow::Cow<'a, str>,
    score: f64,
    label: u8,
}

/// One JSON object per unlabeled item: `{"id", "score", "label"}`.
pub fn write_predictions(path: &Path, corpus: &Corpus, predictions: &Predictions) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for ((&v, &score), &label) in predictions
            .nodes
            .iter()
            .zip(&predictions.scores)
            .zip(&predictions.labels)
        {
            let record = PredictionRecord {
                id: corpus.items()[v].id.as_str().into(),
                score,
                label,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_predictions`].
pub fn read_predictions(path: &Path, corpus: &Corpus) -> Result<Predictions> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let record: PredictionRecord<'_> = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        let v = corpus
            .position(&record.id)
            .ok_or_else(|| Error::UnknownId(record.id.to_string()))?;
        rows.push((v, record.score, record.label));
    }
    rows.sort_by_key(|r| r.0);
    Ok(Predictions {
        nodes: rows.iter().map(|r| r.0).collect(),
        scores: rows.iter().map(|r| r.1).collect(),
        labels: rows.iter().map(|r| r.2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{structural_augment, Provenance, WeightedEdge};
    use crate::graph::SimilarityGraph;

    fn star(weights: &[f64]) -> AugmentedGraph {
        AugmentedGraph::from_edges(
            weights.len() + 1,
            weights.iter().enumerate().map(|(i, &weight)| WeightedEdge {
                u: 0,
                v: i + 1,
                weight,
                provenance: Provenance::Content,
            }),
        )
        .unwrap()
    }

    #[test]
    fn degree_at_most_k_keeps_everything() {
        let g = star(&[1.0, 2.0, 3.0]);
        let mut rng = seed::rng(0);
        assert_eq!(sample_neighbors(&g, 0, 3, &mut rng).unwrap(), vec![1, 2, 3]);
        assert_eq!(
            sample_neighbors(&g, 0, 10, &mut rng).unwrap(),
            vec![1, 2, 3]
        );
        assert_eq!(sample_neighbors(&g, 2, 1, &mut rng).unwrap(), vec![0]);
        assert!(sample_neighbors(&g, 0, 0, &mut rng).is_err());
    }

    #[test]
    fn uniform_weights_give_uniform_inclusion() {
        let g = star(&[1.0; 4]);
        let mut rng = seed::rng(11);
        let mut hits = [0usize; 5];
        let trials = 10_000;
        for _ in 0..trials {
            let picked = sample_neighbors(&g, 0, 2, &mut rng).unwrap();
            assert_eq!(picked.len(), 2);
            assert!(picked[0] < picked[1]);
            for v in picked {
                hits[v] += 1;
            }
        }
        for &h in &hits[1..] {
            let freq = h as f64 / trials as f64;
            assert!((freq - 0.5).abs() <= 0.02, "inclusion frequency {freq}");
        }
    }

    #[test]
    fn heavier_neighbor_is_drawn_proportionally() {
        let g = star(&[3.0, 1.0]);
        let mut rng = seed::rng(5);
        let trials = 10_000;
        let heavy = (0..trials)
            .filter(|_| sample_neighbors(&g, 0, 1, &mut rng).unwrap() == [1])
            .count();
        let freq = heavy as f64 / trials as f64;
        assert!(
            (freq - 0.75).abs() <= 0.02,
            "heavier neighbor frequency {freq}"
        );
    }

    fn ring_with_chords(n: usize) -> AugmentedGraph {
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|v| [(v, (v + 1) % n), (v, (v + 3) % n)])
            .collect();
        structural_augment(&SimilarityGraph::from_edges(n, edges).unwrap(), 0.3).unwrap()
    }

    #[test]
    fn epoch_graph_contract() {
        let g = ring_with_chords(12);
        let mut rng = seed::rng(2);
        let epoch = epoch_graph(&g, 2, &mut rng).unwrap();
        for v in 0..g.n() {
            let sampled = epoch.neighbors(v);
            assert_eq!(sampled.len(), g.degree(v).min(2));
            assert!(sampled.windows(2).all(|w| w[0] < w[1]));
            assert!(sampled.iter().all(|u| g.neighbors(v).contains(u)));
        }
        let full = epoch_graph(&g, g.max_degree(), &mut rng).unwrap();
        for v in 0..g.n() {
            assert_eq!(full.neighbors(v), g.neighbors(v));
        }
        assert_eq!(
            epoch_graph(&g, 2, &mut seed::rng(8)).unwrap(),
            epoch_graph(&g, 2, &mut seed::rng(8)).unwrap()
        );
    }

    #[test]
    fn epoch_graphs_vary_across_epochs() {
        let g = ring_with_chords(12);
        let mut rng = seed::rng(3);
        let graphs: Vec<EpochGraph> = (0..200)
            .map(|_| epoch_graph(&g, 2, &mut rng).unwrap())
            .collect();
        assert!(graphs.iter().any(|e| *e != graphs[0]));
    }

    fn fixture() -> (crate::eval::SyntheticData, Corpus, AugmentedGraph) {
        use crate::graph::{build_knn_graph, Metric};
        let data = crate::eval::make_synthetic(20, 20, 4, 6.0, 1).unwrap();
        let corpus = data.corpus.clone().with_labeled_fraction(0.2, 1).unwrap();
        let knn = build_knn_graph(&data.embeddings, 4, Metric::Euclidean).unwrap();
        let g_sa = structural_augment(&knn, 0.3).unwrap();
        (data, corpus, g_sa)
    }

    fn small_gat() -> GatConfig {
        GatConfig {
            hidden_dim: 4,
            heads: 2,
            epochs: 30,
            learning_rate: 0.05,
            ..GatConfig::default()
        }
    }

    #[test]
    fn predictions_cover_exactly_the_unlabeled_nodes() {
        let (data, corpus, g_sa) = fixture();
        let truth = corpus.ground_truth().unwrap();
        let unlabeled = corpus.unlabeled();
        let pseudo = PseudoLabels {
            ip: unlabeled
                .iter()
                .copied()
                .filter(|&v| truth[v] == 1)
                .take(4)
                .collect(),
            in_: unlabeled
                .iter()
                .copied()
                .filter(|&v| truth[v] == 0)
                .take(4)
                .collect(),
            p: 1.0,
            seed: 0,
        };
        let run = |seed| {
            train_and_predict(
                &g_sa,
                &data.embeddings,
                corpus.labeled(),
                &pseudo,
                ClassifyConfig::default(),
                small_gat(),
                seed,
            )
            .unwrap()
        };
        let first = run(4);
        assert_eq!(first.nodes, unlabeled);
        assert_eq!(first.scores.len(), unlabeled.len());
        assert!(first
            .scores
            .iter()
            .zip(&first.labels)
            .all(|(&s, &l)| (0.0..=1.0).contains(&s) && l == u8::from(s >= 0.5)));
        assert_eq!(first, run(4));

        let full = train_and_predict(
            &g_sa,
            &data.embeddings,
            corpus.labeled(),
            &pseudo,
            ClassifyConfig {
                final_inference: FinalInference::Full,
                ..ClassifyConfig::default()
            },
            small_gat(),
            4,
        )
        .unwrap();
        assert_eq!(full.nodes, unlabeled);
    }

    #[test]
    fn single_class_is_rejected() {
        let (data, corpus, g_sa) = fixture();
        let pseudo = PseudoLabels {
            ip: vec![],
            in_: vec![],
            p: 1.0,
            seed: 0,
        };
        let err = train_and_predict(
            &g_sa,
            &data.embeddings,
            corpus.labeled(),
            &pseudo,
            ClassifyConfig::default(),
            small_gat(),
            0,
        );
        assert!(matches!(err, Err(Error::SingleClass)));
    }

    #[test]
    fn prediction_dump_round_trips() {
        let (data, corpus, _) = fixture();
        let predictions = Predictions {
            nodes: vec![2, 5],
            scores: vec![0.125, 0.987654321],
            labels: vec![0, 1],
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_predictions(f.path(), &data.corpus, &predictions).unwrap();
        assert_eq!(read_predictions(f.path(), &corpus).unwrap(), predictions);
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"label\":0"));
    }
}
