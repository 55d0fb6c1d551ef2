use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{DataSource, EmbeddingSource, PipelineConfig};
use crate::augment::{read_augmented, write_augmented, AugmentedGraph};
use crate::classify::{read_predictions, write_predictions, Predictions};
use crate::corpus::{
    embed_corpus, header_field, load_embeddings, read_corpus, read_id_lists, take_list,
    write_embeddings, write_id_lists, Corpus, EmbeddingMatrix,
};
use crate::error::{Error, Result, Stage, StageExt};
use crate::eval::{
    run_ablation, run_grid_max, write_ablation, write_reports, EvalReport, RunRow, ScenarioConfig,
};
use crate::graph::{read_edge_list, write_edge_list, SimilarityGraph};
use crate::katz::{read_selection, write_selection, KatzSelection};
use crate::lp2::{read_pseudo_labels, write_pseudo_labels, PseudoLabels};
use crate::pipeline::{self, RunSeeds};

const EMBEDDINGS: &str = "embeddings.txt";
const GRAPH: &str = "graph.txt";
const AUGMENTED: &str = "augmented.txt";
const LABELED: &str = "labeled.txt";
const SELECTION: &str = "katz_selection.txt";
const PSEUDO: &str = "pseudo_labels.txt";
const PREDICTIONS: &str = "predictions.jsonl";
const REPORT: &str = "report";

/// An output directory bound to one configuration. Every stage reads its
/// inputs from, and writes its artifacts to, fixed file names inside it.
#[derive(Debug, Clone)]
pub struct Workspace {
    config: PipelineConfig,
    scenario: ScenarioConfig,
}

/// The labeled draw of one run and its Katz selection.
#[derive(Debug, Clone, PartialEq)]
struct Seeded {
    labeled: Vec<usize>,
    selection: KatzSelection,
}

impl Workspace {
    pub fn new(config: PipelineConfig, jobs: usize) -> Self {
        let scenario = config.scenario(jobs);
        Self { config, scenario }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn output(&self) -> &Path {
        &self.config.output
    }

    /// Directory of repetition `repetition` of the fraction at `fraction_index`.
    pub fn run_dir(&self, fraction_index: usize, repetition: usize) -> PathBuf {
        self.output()
            .join("runs")
            .join(format!("f{fraction_index}-r{repetition}"))
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.output().join(name)
    }

    fn require(path: &Path, stage: Stage) -> Result<()> {
        if path.is_file() {
            Ok(())
        } else {
            Err(Error::MissingArtifact(path.to_path_buf())).at(stage)
        }
    }

    fn create_dir(path: &Path) -> Result<()> {
        fs::create_dir_all(path).map_err(|e| Error::io(path, e))
    }

    /// Applies `f` to every run, `jobs` runs at a time, in report order.
    fn per_run<T: Send>(
        &self,
        f: impl Fn(usize, usize, &RunSeeds) -> Result<T> + Sync,
    ) -> Result<Vec<T>> {
        let runs = self.scenario.runs();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.scenario.jobs)
            .build()
            .map_err(|e| Error::param("jobs", e.to_string()))?;
        pool.install(|| {
            runs.par_iter()
                .map(|&(fi, r)| {
                    f(fi, r, &self.scenario.seeds(fi, r)).map_err(|e| Error::Repetition {
                        fraction: self.scenario.labeled_fractions[fi],
                        repetition: r,
                        source: Box::new(e),
                    })
                })
                .collect()
        })
    }

    /// The items, plus their vectors when the data source provides them directly.
    fn source(&self) -> Result<(Corpus, Option<EmbeddingMatrix>)> {
        match self.config.data.source {
            DataSource::Synthetic => {
                let data = self.config.synthetic.generate()?;
                Ok((data.corpus, Some(data.embeddings)))
            }
            DataSource::Jsonl => {
                let path = self
                    .config
                    .data
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("data.path is required".into()))?;
                Ok((read_corpus(path)?, None))
            }
        }
    }

    fn corpus(&self) -> Result<Corpus> {
        Ok(self.source().at(Stage::Embed)?.0)
    }

    fn load_embeddings(&self, corpus: &Corpus, stage: Stage) -> Result<EmbeddingMatrix> {
        let path = self.artifact(EMBEDDINGS);
        Self::require(&path, stage)?;
        load_embeddings(&path, corpus).at(stage)
    }

    fn load_graph(&self, corpus: &Corpus, stage: Stage) -> Result<SimilarityGraph> {
        let path = self.artifact(GRAPH);
        Self::require(&path, stage)?;
        read_edge_list(&path, corpus.len()).at(stage)
    }

    // ---- stages: each writes its artifacts and returns them in memory ----

    fn embed(&self) -> Result<(Corpus, EmbeddingMatrix)> {
        let (corpus, x) = self.embed_in_memory()?;
        Self::create_dir(self.output())?;
        write_embeddings(&self.artifact(EMBEDDINGS), &corpus, &x).at(Stage::Embed)?;
        Ok((corpus, x))
    }

    fn embed_in_memory(&self) -> Result<(Corpus, EmbeddingMatrix)> {
        let inner = || -> Result<(Corpus, EmbeddingMatrix)> {
            let (corpus, direct) = self.source()?;
            let x = match (direct, self.config.data.embeddings) {
                (Some(x), _) => x,
                (None, EmbeddingSource::Builtin) => embed_corpus(&corpus, &self.config.embedder)?,
                (None, EmbeddingSource::File) => {
                    let path =
                        self.config.data.embeddings_path.as_ref().ok_or_else(|| {
                            Error::Config("data.embeddings_path is required".into())
                        })?;
                    load_embeddings(path, &corpus)?
                }
            };
            Ok((corpus, x))
        };
        inner().at(Stage::Embed)
    }

    fn graph(&self, x: &EmbeddingMatrix) -> Result<SimilarityGraph> {
        let graph = pipeline::build_graph(x, &self.scenario.params)?;
        write_edge_list(&self.artifact(GRAPH), &graph).at(Stage::Graph)?;
        Ok(graph)
    }

    fn katz(&self, corpus: &Corpus, graph: &SimilarityGraph) -> Result<Vec<Seeded>> {
        let katz = pipeline::build_katz(graph, &self.scenario.params)?;
        self.per_run(|fi, r, seeds| {
            let fraction = self.scenario.labeled_fractions[fi];
            let labeled = pipeline::draw_labeled(corpus, fraction, seeds)?;
            let selection = pipeline::select_katz(&katz, &labeled, &self.scenario.params)?;
            let dir = self.run_dir(fi, r);
            Self::create_dir(&dir)?;
            let header = format!("labeled fraction={fraction} seed={}", seeds.labeled);
            write_id_lists(
                &dir.join(LABELED),
                corpus,
                &header,
                &[("labeled", &labeled)],
            )
            .at(Stage::Katz)?;
            write_selection(&dir.join(SELECTION), corpus, &selection).at(Stage::Katz)?;
            Ok(Seeded { labeled, selection })
        })
    }

    fn lp2(
        &self,
        corpus: &Corpus,
        x: &EmbeddingMatrix,
        graph: &SimilarityGraph,
        seeded: &[Seeded],
    ) -> Result<Vec<PseudoLabels>> {
        let hash = self.config.hash();
        let runs = self.scenario.runs();
        self.per_run(|fi, r, seeds| {
            let at = runs
                .iter()
                .position(|&run| run == (fi, r))
                .expect("known run");
            let s = &seeded[at];
            let pseudo = pipeline::second_step(
                graph,
                x,
                &s.labeled,
                &s.selection,
                &self.scenario.params,
                seeds,
            )?;
            write_pseudo_labels(&self.run_dir(fi, r).join(PSEUDO), corpus, &pseudo, &hash)
                .at(Stage::Lp2)?;
            Ok(pseudo)
        })
    }

    fn augment(&self, graph: &SimilarityGraph) -> Result<AugmentedGraph> {
        let augmented = pipeline::build_augmented(graph, &self.scenario.params)?;
        write_augmented(&self.artifact(AUGMENTED), &augmented).at(Stage::Augment)?;
        Ok(augmented)
    }

    fn classify(
        &self,
        corpus: &Corpus,
        x: &EmbeddingMatrix,
        augmented: &AugmentedGraph,
        labeled: &[Vec<usize>],
        pseudo: &[PseudoLabels],
    ) -> Result<Vec<Predictions>> {
        let runs = self.scenario.runs();
        self.per_run(|fi, r, seeds| {
            let at = runs
                .iter()
                .position(|&run| run == (fi, r))
                .expect("known run");
            let predictions = pipeline::classify(
                augmented,
                x,
                &labeled[at],
                &pseudo[at],
                &self.scenario.params,
                seeds,
            )?;
            write_predictions(&self.run_dir(fi, r).join(PREDICTIONS), corpus, &predictions)
                .at(Stage::Classify)?;
            Ok(predictions)
        })
    }

    fn score(&self, corpus: &Corpus, predictions: &[Predictions]) -> Result<Vec<EvalReport>> {
        let truth = corpus.ground_truth().at(Stage::Score)?;
        let runs = self.scenario.runs();
        let mut rows: Vec<Vec<RunRow>> = vec![Vec::new(); self.scenario.labeled_fractions.len()];
        for (&(fi, r), p) in runs.iter().zip(predictions) {
            let metrics = pipeline::score(&truth, p)?;
            rows[fi].push(RunRow::new(r, self.scenario.seeds(fi, r).run, metrics));
        }
        let reports: Vec<EvalReport> = self
            .scenario
            .labeled_fractions
            .iter()
            .zip(rows)
            .map(|(&f, rows)| EvalReport::new(f, rows))
            .collect();
        write_reports(self.output(), REPORT, &reports, &self.config).at(Stage::Score)?;
        Ok(reports)
    }

    // ---- readers for stage-by-stage execution ----

    fn load_labeled(&self, corpus: &Corpus, stage: Stage) -> Result<Vec<Vec<usize>>> {
        self.per_run(|fi, r, _| {
            let path = self.run_dir(fi, r).join(LABELED);
            Self::require(&path, stage)?;
            let read = || -> Result<Vec<usize>> {
                let (header, mut lists) = read_id_lists(&path, corpus)?;
                if header_field(&header, "fraction").is_none() {
                    return Err(Error::parse(
                        path.display().to_string(),
                        "header lacks fraction=",
                    ));
                }
                take_list(&path, &mut lists, "labeled")
            };
            read().at(stage)
        })
    }

    fn load_seeded(&self, corpus: &Corpus, stage: Stage) -> Result<Vec<Seeded>> {
        let labeled = self.load_labeled(corpus, stage)?;
        let selections = self.per_run(|fi, r, _| {
            let path = self.run_dir(fi, r).join(SELECTION);
            Self::require(&path, stage)?;
            read_selection(&path, corpus).at(stage)
        })?;
        Ok(labeled
            .into_iter()
            .zip(selections)
            .map(|(labeled, selection)| Seeded { labeled, selection })
            .collect())
    }

    fn load_pseudo(&self, corpus: &Corpus, stage: Stage) -> Result<Vec<PseudoLabels>> {
        self.per_run(|fi, r, _| {
            let path = self.run_dir(fi, r).join(PSEUDO);
            Self::require(&path, stage)?;
            read_pseudo_labels(&path, corpus).at(stage)
        })
    }

    fn load_predictions(&self, corpus: &Corpus) -> Result<Vec<Predictions>> {
        self.per_run(|fi, r, _| {
            let path = self.run_dir(fi, r).join(PREDICTIONS);
            Self::require(&path, Stage::Score)?;
            read_predictions(&path, corpus).at(Stage::Score)
        })
    }

    // ---- commands ----

    /// Every stage in order, then the report.
    pub fn run(&self) -> Result<Vec<EvalReport>> {
        let (corpus, x) = self.embed()?;
        let graph = self.graph(&x)?;
        let seeded = self.katz(&corpus, &graph)?;
        let pseudo = self.lp2(&corpus, &x, &graph, &seeded)?;
        let augmented = self.augment(&graph)?;
        let labeled: Vec<Vec<usize>> = seeded.into_iter().map(|s| s.labeled).collect();
        let predictions = self.classify(&corpus, &x, &augmented, &labeled, &pseudo)?;
        self.score(&corpus, &predictions)
    }

    /// One stage, reading the artifacts of the stages before it.
    pub fn stage(&self, stage: Stage) -> Result<()> {
        if stage == Stage::Embed {
            return self.embed().map(drop);
        }
        let corpus = self.corpus()?;
        match stage {
            Stage::Embed => unreachable!("handled above"),
            Stage::Graph => {
                let x = self.load_embeddings(&corpus, stage)?;
                self.graph(&x).map(drop)
            }
            Stage::Katz => {
                let graph = self.load_graph(&corpus, stage)?;
                self.katz(&corpus, &graph).map(drop)
            }
            Stage::Lp2 => {
                let x = self.load_embeddings(&corpus, stage)?;
                let graph = self.load_graph(&corpus, stage)?;
                let seeded = self.load_seeded(&corpus, stage)?;
                self.lp2(&corpus, &x, &graph, &seeded).map(drop)
            }
            Stage::Augment => {
                let graph = self.load_graph(&corpus, stage)?;
                self.augment(&graph).map(drop)
            }
            Stage::Classify => {
                let x = self.load_embeddings(&corpus, stage)?;
                let path = self.artifact(AUGMENTED);
                Self::require(&path, stage)?;
                let augmented = read_augmented(&path, corpus.len()).at(stage)?;
                let labeled = self.load_labeled(&corpus, stage)?;
                let pseudo = self.load_pseudo(&corpus, stage)?;
                self.classify(&corpus, &x, &augmented, &labeled, &pseudo)
                    .map(drop)
            }
            Stage::Score => self.report().map(drop),
        }
    }

    /// Scores the predictions already on disk.
    pub fn report(&self) -> Result<Vec<EvalReport>> {
        let corpus = self.corpus()?;
        let predictions = self.load_predictions(&corpus)?;
        self.score(&corpus, &predictions)
    }

    /// Paired one-step / two-step reports under `<output>/ablation`.
    pub fn ablate(&self) -> Result<()> {
        let (corpus, x) = self.embed_in_memory()?;
        let reports = run_ablation(&corpus, &x, &self.scenario)?;
        let dir = self.output().join("ablation");
        Self::create_dir(&dir)?;
        write_ablation(&dir, &reports, &self.config)
    }

    /// Per-repetition best over the `[grid]` points, under `<output>/grid`.
    pub fn grid_max(&self) -> Result<Vec<EvalReport>> {
        let (corpus, x) = self.embed_in_memory()?;
        let reports = run_grid_max(&corpus, &x, &self.scenario, &self.config.grid)?;
        let dir = self.output().join("grid");
        Self::create_dir(&dir)?;
        write_reports(&dir, REPORT, &reports, &self.config)?;
        Ok(reports)
    }
}
