//! Second propagation step: an initial attention classifier trained on the
//! Katz pseudo-labels splits the unlabeled nodes into predicted interest and
//! non-interest, and a uniform random share of each side becomes the new
//! pseudo-labeled sets.

use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    complement, floor_count, header_field, read_id_lists, take_list, write_id_lists, Corpus,
    EmbeddingMatrix,
};
use crate::error::{Error, Result};
use crate::gat::{train, GatConfig, TrainingSet};
use crate::graph::SimilarityGraph;
use crate::katz::KatzSelection;
use crate::seed;

/// Logistic outputs at or above this value count as interest.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lp2Config {
    /// Share of each predicted class kept as pseudo-labels.
    pub p: f64,
}

impl Default for Lp2Config {
    fn default() -> Self {
        Self { p: 0.6 }
    }
}

impl Lp2Config {
    pub fn validate(&self) -> Result<()> {
        validate_p(self.p)
    }
}

fn validate_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("lp2.p", format!("{p} is outside (0, 1]")))
    }
}

/// Pseudo-labeled unlabeled nodes: `ip` inferred interest, `in_` inferred
/// non-interest. Both sorted ascending and disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub ip: Vec<usize>,
    pub in_: Vec<usize>,
    pub p: f64,
    pub seed: u64,
}

impl PseudoLabels {
    /// Uses the step-1 Katz selection unchanged, as when the second step is skipped.
    pub fn from_katz(selection: &KatzSelection) -> Self {
        Self {
            ip: selection.ip_katz.clone(),
            in_: selection.in_katz.clone(),
            p: 1.0,
            seed: 0,
        }
    }
}

/// Predicted split of the unlabeled nodes by the initial classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSplit {
    /// Unlabeled nodes predicted as interest, ascending.
    pub fake: Vec<usize>,
    /// Unlabeled nodes predicted as non-interest, ascending.
    pub real: Vec<usize>,
    /// Logistic output for every node of the graph.
    pub scores: Vec<f64>,
}

/// Trains the initial classifier on `labeled ∪ ip_katz` (interest) and
/// `in_katz` (non-interest) over the kNN graph and thresholds every
/// unlabeled node at [`DECISION_THRESHOLD`].
pub fn initial_split(
    graph: &SimilarityGraph,
    x: &EmbeddingMatrix,
    labeled: &[usize],
    katz_sel: &KatzSelection,
    gat_config: GatConfig,
) -> Result<InitialSplit> {
    let n = graph.n();
    if x.n_items() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {n} graph nodes",
            x.n_items()
        )));
    }
    let mut positives: Vec<usize> = labeled.iter().chain(&katz_sel.ip_katz).copied().collect();
    positives.sort_unstable();
    positives.dedup();
    let set = TrainingSet::from_classes(&positives, &katz_sel.in_katz)?;
    if !set.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let trained = train(gat_config, graph, x, &set)?;
    let scores = trained.model.predict(graph, x)?;

    let mut sorted_labeled = labeled.to_vec();
    sorted_labeled.sort_unstable();
    sorted_labeled.dedup();
    let (fake, real) = complement(n, &sorted_labeled)
        .into_iter()
        .partition(|&u| scores[u] >= DECISION_THRESHOLD);
    Ok(InitialSplit { fake, real, scores })
}

/// Keeps a uniform random `⌊p·|class|⌋` of each predicted class, sampled
/// without replacement (interest first, then non-interest, from one stream).
pub fn select_pseudo_labels(
    fake: &[usize],
    real: &[usize],
    p: f64,
    seed: u64,
) -> Result<PseudoLabels> {
    validate_p(p)?;
    if fake.is_empty() {
        return Err(Error::EmptyPredictedClass { class: "interest" });
    }
    if real.is_empty() {
        return Err(Error::EmptyPredictedClass {
            class: "non-interest",
        });
    }
    let mut rng = seed::rng(seed);
    let mut draw = |from: &[usize]| {
        let amount = floor_count(p, from.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, from.len(), amount)
            .into_iter()
            .map(|i| from[i])
            .collect();
        picked.sort_unstable();
        picked
    };
    let ip = draw(fake);
    let in_ = draw(real);
    Ok(PseudoLabels { ip, in_, p, seed })
}

/// The full second step: [`initial_split`] followed by [`select_pseudo_labels`].
pub fn infer_pseudo_labels(
    graph: &SimilarityGraph,
    x: &EmbeddingMatrix,
    labeled: &[usize],
    katz_sel: &KatzSelection,
    p: f64,
    gat_config: GatConfig,
    seed: u64,
) -> Result<PseudoLabels> {
    validate_p(p)?;
    let split = initial_split(graph, x, labeled, katz_sel, gat_config)?;
    select_pseudo_labels(&split.fake, &split.real, p, seed)
}

/// Writes the two id lists under a provenance header.
///
/// ```text
/// # pseudo-labels seed=<seed> p=<p> config=<hash>
/// ip <id> <id> ...
/// in <id> <id> ...
/// ```
pub fn write_pseudo_labels(
    path: &Path,
    corpus: &Corpus,
    labels: &PseudoLabels,
    config_hash: &str,
) -> Result<()> {
    let header = format!(
        "pseudo-labels seed={} p={} config={config_hash}",
        labels.seed, labels.p
    );
    write_id_lists(
        path,
        corpus,
        &header,
        &[("ip", &labels.ip), ("in", &labels.in_)],
    )
}

/// Reads a file written by [`write_pseudo_labels`].
pub fn read_pseudo_labels(path: &Path, corpus: &Corpus) -> Result<PseudoLabels> {
    let (header, mut lists) = read_id_lists(path, corpus)?;
    let seed = header_field(&header, "seed").and_then(|v| v.parse().ok());
    let p = header_field(&header, "p").and_then(|v| v.parse().ok());
    let (seed, p) = seed.zip(p).ok_or_else(|| {
        Error::parse(path.display().to_string(), "header must carry seed= and p=")
    })?;
    Ok(PseudoLabels {
        ip: take_list(path, &mut lists, "ip")?,
        in_: take_list(path, &mut lists, "in")?,
        p,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::make_synthetic;
    use crate::graph::{adjacency_matrix, build_knn_graph, Metric};
    use crate::katz::{katz_matrix, propagate_step1};

    #[test]
    fn full_selection_keeps_every_prediction() {
        let fake = [1, 4, 7];
        let real = [0, 2, 3, 5];
        let labels = select_pseudo_labels(&fake, &real, 1.0, 9).unwrap();
        assert_eq!(labels.ip, fake);
        assert_eq!(labels.in_, real);
    }

    #[test]
    fn selection_sizes_are_floored() {
        let fake: Vec<usize> = (0..7).collect();
        let real: Vec<usize> = (7..12).collect();
        let labels = select_pseudo_labels(&fake, &real, 0.6, 1).unwrap();
        assert_eq!(labels.ip.len(), 4);
        assert_eq!(labels.in_.len(), 3);
        assert!(labels.ip.windows(2).all(|w| w[0] < w[1]));
        assert!(labels.ip.iter().all(|v| fake.contains(v)));
        assert!(labels.in_.iter().all(|v| real.contains(v)));
    }

    #[test]
    fn empty_predicted_class_is_reported() {
        assert!(matches!(
            select_pseudo_labels(&[], &[1], 0.5, 0),
            Err(Error::EmptyPredictedClass { .. })
        ));
        assert!(matches!(
            select_pseudo_labels(&[1], &[], 0.5, 0),
            Err(Error::EmptyPredictedClass { .. })
        ));
        assert!(select_pseudo_labels(&[1], &[2], 0.0, 0).is_err());
        assert!(select_pseudo_labels(&[1], &[2], 1.5, 0).is_err());
    }

    #[test]
    fn inclusion_is_uniform() {
        let fake: Vec<usize> = (0..10).collect();
        let mut hits = [0usize; 10];
        let trials = 1000;
        for s in 0..trials {
            for v in select_pseudo_labels(&fake, &[99], 0.5, s).unwrap().ip {
                hits[v] += 1;
            }
        }
        for h in hits {
            let freq = h as f64 / trials as f64;
            assert!((freq - 0.5).abs() <= 0.06, "inclusion frequency {freq}");
        }
    }

    fn small_config(seed: u64) -> GatConfig {
        GatConfig {
            hidden_dim: 8,
            heads: 2,
            epochs: 100,
            learning_rate: 0.05,
            seed,
            ..GatConfig::default()
        }
    }

    #[test]
    fn pseudo_labels_concentrate_in_the_seeded_cluster() {
        let mut in_cluster = 0usize;
        let mut total = 0usize;
        for s in 0..10u64 {
            let data = make_synthetic(40, 40, 8, 8.0, s).unwrap();
            let corpus = data.corpus.with_labeled_fraction(0.1, s).unwrap();
            let graph = build_knn_graph(&data.embeddings, 6, Metric::Euclidean).unwrap();
            let katz = katz_matrix(&adjacency_matrix(&graph), 0.01).unwrap();
            let sel = propagate_step1(&katz, corpus.labeled(), 0.1, 0.1).unwrap();
            let labels = infer_pseudo_labels(
                &graph,
                &data.embeddings,
                corpus.labeled(),
                &sel,
                0.6,
                small_config(s),
                s,
            )
            .unwrap();
            let truth = corpus.ground_truth().unwrap();
            in_cluster += labels.ip.iter().filter(|&&v| truth[v] == 1).count();
            total += labels.ip.len();
            assert!(labels.ip.iter().all(|v| !corpus.labeled().contains(v)));
            assert!(labels.in_.iter().all(|v| !corpus.labeled().contains(v)));
            assert!(labels.ip.iter().all(|v| !labels.in_.contains(v)));
        }
        let share = in_cluster as f64 / total as f64;
        assert!(
            share >= 0.9,
            "only {share} of ip lies in the seeded cluster"
        );
    }

    #[test]
    fn same_seed_same_pseudo_labels() {
        let data = make_synthetic(15, 15, 4, 6.0, 3).unwrap();
        let corpus = data.corpus.with_labeled_fraction(0.2, 3).unwrap();
        let graph = build_knn_graph(&data.embeddings, 4, Metric::Euclidean).unwrap();
        let katz = katz_matrix(&adjacency_matrix(&graph), 0.01).unwrap();
        let sel = propagate_step1(&katz, corpus.labeled(), 0.1, 0.1).unwrap();
        let run = || {
            infer_pseudo_labels(
                &graph,
                &data.embeddings,
                corpus.labeled(),
                &sel,
                0.6,
                small_config(1),
                5,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_class_training_set_is_rejected() {
        let data = make_synthetic(5, 5, 2, 4.0, 0).unwrap();
        let graph = build_knn_graph(&data.embeddings, 2, Metric::Euclidean).unwrap();
        let sel = KatzSelection {
            ip_katz: vec![1],
            in_katz: vec![],
            ip_ratio: 0.1,
            in_ratio: 0.0,
        };
        let err = infer_pseudo_labels(
            &graph,
            &data.embeddings,
            &[0],
            &sel,
            0.6,
            small_config(0),
            0,
        );
        assert!(matches!(err, Err(Error::SingleClass)));
    }

    #[test]
    fn dump_round_trips() {
        let data = make_synthetic(3, 3, 2, 4.0, 0).unwrap();
        let labels = PseudoLabels {
            ip: vec![1, 4],
            in_: vec![2],
            p: 0.6,
            seed: 77,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pseudo.txt");
        write_pseudo_labels(&path, &data.corpus, &labels, "abc").unwrap();
        assert_eq!(read_pseudo_labels(&path, &data.corpus).unwrap(), labels);
    }
}
