//! One pipeline run, stage by stage.
//!
//! The kNN graph, the Katz matrix and the augmented graph depend only on the
//! embeddings, so they are built once per dataset ([`prepare`]) and shared by
//! every run. Each run then draws its labeled positives and executes the
//! label-dependent stages with seeds derived from its run seed:
//!
//! | stream            | seed                                    |
//! |-------------------|-----------------------------------------|
//! | labeled draw      | `derive(run, "labeled", 0)`             |
//! | lp2 model init    | `derive(run, "lp2.gat", gat.seed)`      |
//! | lp2 sampling      | `derive(run, "lp2", 0)`                 |
//! | final model init  | `derive(run, "classify.gat", gat.seed)` |
//! | neighbor sampling | `derive(run, "classify", 0)`            |

use serde::{Deserialize, Serialize};

use crate::augment::{structural_augment, AugmentConfig, AugmentedGraph};
use crate::classify::{train_and_predict, ClassifyConfig, Predictions};
use crate::corpus::{Corpus, EmbeddingMatrix};
use crate::error::{Error, Result, Stage, StageExt};
use crate::eval::Metrics;
use crate::gat::GatConfig;
use crate::graph::{adjacency_matrix, build_knn_graph, GraphConfig, SimilarityGraph};
use crate::katz::{katz_matrix, propagate_step1, KatzConfig, KatzMatrix, KatzSelection};
use crate::lp2::{infer_pseudo_labels, Lp2Config, PseudoLabels};
use crate::seed;

/// Every tunable of the label-dependent pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineParams {
    pub graph: GraphConfig,
    pub katz: KatzConfig,
    pub lp2: Lp2Config,
    pub augment: AugmentConfig,
    pub classify: ClassifyConfig,
    pub gat: GatConfig,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate().at(Stage::Graph)?;
        self.katz.validate().at(Stage::Katz)?;
        self.lp2.validate().at(Stage::Lp2)?;
        self.augment.validate().at(Stage::Augment)?;
        self.classify.validate().at(Stage::Classify)?;
        self.gat.validate().at(Stage::Classify)
    }
}

/// Which propagation the final classifier is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// Katz pseudo-labels only; the second propagation step is skipped.
    OneStep,
    /// The full pipeline.
    TwoStep,
}

/// Per-run seeds, all derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: u64,
    pub labeled: u64,
    pub lp2_gat: u64,
    pub lp2_sampling: u64,
    pub classify_gat: u64,
    pub classify_sampling: u64,
}

impl RunSeeds {
    pub fn new(run: u64, gat: &GatConfig) -> Self {
        Self {
            run,
            labeled: seed::derive(run, "labeled", 0),
            lp2_gat: seed::derive(run, "lp2.gat", gat.seed),
            lp2_sampling: seed::derive(run, "lp2", 0),
            classify_gat: seed::derive(run, "classify.gat", gat.seed),
            classify_sampling: seed::derive(run, "classify", 0),
        }
    }

    /// Seeds of repetition `repetition` of the scenario at `fraction_index`.
    pub fn for_repetition(
        master: u64,
        fraction_index: usize,
        repetition: usize,
        gat: &GatConfig,
    ) -> Self {
        Self::new(seed::repetition(master, fraction_index, repetition), gat)
    }
}

/// Label-independent structures shared by every run on one dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: SimilarityGraph,
    pub katz: KatzMatrix,
    pub augmented: AugmentedGraph,
}

pub fn build_graph(x: &EmbeddingMatrix, params: &PipelineParams) -> Result<SimilarityGraph> {
    build_knn_graph(x, params.graph.k, params.graph.metric).at(Stage::Graph)
}

pub fn build_katz(graph: &SimilarityGraph, params: &PipelineParams) -> Result<KatzMatrix> {
    katz_matrix(&adjacency_matrix(graph), params.katz.alpha).at(Stage::Katz)
}

pub fn build_augmented(graph: &SimilarityGraph, params: &PipelineParams) -> Result<AugmentedGraph> {
    structural_augment(graph, params.augment.threshold).at(Stage::Augment)
}

pub fn prepare(x: &EmbeddingMatrix, params: &PipelineParams) -> Result<Prepared> {
    params.validate()?;
    let graph = build_graph(x, params)?;
    let katz = build_katz(&graph, params)?;
    let augmented = build_augmented(&graph, params)?;
    Ok(Prepared {
        graph,
        katz,
        augmented,
    })
}

/// Draws `⌊fraction · #positives⌋` labeled positives.
pub fn draw_labeled(corpus: &Corpus, fraction: f64, seeds: &RunSeeds) -> Result<Vec<usize>> {
    let labeled = corpus
        .draw_labeled(fraction, seeds.labeled)
        .at(Stage::Katz)?;
    if labeled.is_empty() {
        return Err(Error::param(
            "labeled_fraction",
            format!(
                "{fraction} of {} positives selects no item",
                corpus.positives().len()
            ),
        ))
        .at(Stage::Katz);
    }
    Ok(labeled)
}

pub fn select_katz(
    katz: &KatzMatrix,
    labeled: &[usize],
    params: &PipelineParams,
) -> Result<KatzSelection> {
    propagate_step1(katz, labeled, params.katz.ip_ratio, params.katz.in_ratio).at(Stage::Katz)
}

pub fn second_step(
    graph: &SimilarityGraph,
    x: &EmbeddingMatrix,
    labeled: &[usize],
    selection: &KatzSelection,
    params: &PipelineParams,
    seeds: &RunSeeds,
) -> Result<PseudoLabels> {
    infer_pseudo_labels(
        graph,
        x,
        labeled,
        selection,
        params.lp2.p,
        params.gat.with_seed(seeds.lp2_gat),
        seeds.lp2_sampling,
    )
    .at(Stage::Lp2)
}

pub fn classify(
    augmented: &AugmentedGraph,
    x: &EmbeddingMatrix,
    labeled: &[usize],
    pseudo: &PseudoLabels,
    params: &PipelineParams,
    seeds: &RunSeeds,
) -> Result<Predictions> {
    train_and_predict(
        augmented,
        x,
        labeled,
        pseudo,
        params.classify,
        params.gat.with_seed(seeds.classify_gat),
        seeds.classify_sampling,
    )
    .at(Stage::Classify)
}

/// Scores predictions against the ground truth of the predicted nodes.
pub fn score(truth: &[u8], predictions: &Predictions) -> Result<Metrics> {
    let y_true: Vec<u8> = predictions.nodes.iter().map(|&v| truth[v]).collect();
    Metrics::score(&y_true, &predictions.labels).at(Stage::Score)
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub labeled: Vec<usize>,
    pub selection: KatzSelection,
    /// `None` for the one-step arm.
    pub pseudo: Option<PseudoLabels>,
    pub predictions: Predictions,
}

/// Runs the label-dependent stages for one labeled fraction.
pub fn run_once(
    corpus: &Corpus,
    x: &EmbeddingMatrix,
    prepared: &Prepared,
    params: &PipelineParams,
    fraction: f64,
    seeds: &RunSeeds,
    arm: Arm,
) -> Result<RunArtifacts> {
    let labeled = draw_labeled(corpus, fraction, seeds)?;
    let selection = select_katz(&prepared.katz, &labeled, params)?;
    let (pseudo, training) = match arm {
        Arm::OneStep => (None, PseudoLabels::from_katz(&selection)),
        Arm::TwoStep => {
            let pseudo = second_step(&prepared.graph, x, &labeled, &selection, params, seeds)?;
            (Some(pseudo.clone()), pseudo)
        }
    };
    let predictions = classify(&prepared.augmented, x, &labeled, &training, params, seeds)?;
    Ok(RunArtifacts {
        labeled,
        selection,
        pseudo,
        predictions,
    })
}
