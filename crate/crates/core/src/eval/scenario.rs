use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{AblationReport, EvalReport, RunRow};
use super::Metrics;
use crate::corpus::{Corpus, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::pipeline::{
    prepare, run_once, score, Arm, PipelineParams, Prepared, RunArtifacts, RunSeeds,
};

/// The labeled-fraction protocol: every fraction is repeated with fresh
/// labeled draws, and each repetition runs the whole pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub labeled_fractions: Vec<f64>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub params: PipelineParams,
    /// Worker threads for independent runs; results do not depend on it.
    pub jobs: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            labeled_fractions: vec![0.1, 0.2, 0.3],
            repetitions: 10,
            master_seed: 0,
            params: PipelineParams::default(),
            jobs: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.labeled_fractions.is_empty() {
            return Err(Error::Empty("scenario.labeled_fractions"));
        }
        if let Some(f) = self
            .labeled_fractions
            .iter()
            .find(|f| !(**f > 0.0 && **f < 1.0))
        {
            return Err(Error::param(
                "scenario.labeled_fractions",
                format!("{f} is outside (0, 1)"),
            ));
        }
        if self.repetitions < 1 {
            return Err(Error::param("scenario.repetitions", "must be at least 1"));
        }
        if self.jobs < 1 {
            return Err(Error::param("jobs", "must be at least 1"));
        }
        self.params.validate()
    }

    /// `(fraction index, repetition)` of every run, in report order.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        (0..self.labeled_fractions.len())
            .flat_map(|f| (0..self.repetitions).map(move |r| (f, r)))
            .collect()
    }

    pub fn seeds(&self, fraction_index: usize, repetition: usize) -> RunSeeds {
        RunSeeds::for_repetition(
            self.master_seed,
            fraction_index,
            repetition,
            &self.params.gat,
        )
    }
}

/// One finished run of the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub fraction_index: usize,
    pub fraction: f64,
    pub repetition: usize,
    pub seeds: RunSeeds,
    pub artifacts: RunArtifacts,
    pub metrics: Metrics,
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::param("jobs", e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs every `(fraction, repetition)` of `config` on shared prepared
/// structures, returning outcomes in report order.
pub fn execute_runs(
    corpus: &Corpus,
    x: &EmbeddingMatrix,
    prepared: &Prepared,
    config: &ScenarioConfig,
    arm: Arm,
) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let truth = corpus.ground_truth()?;
    let runs = config.runs();
    in_pool(config.jobs, || {
        runs.par_iter()
            .map(|&(fi, r)| {
                let fraction = config.labeled_fractions[fi];
                let seeds = config.seeds(fi, r);
                let outcome = run_once(corpus, x, prepared, &config.params, fraction, &seeds, arm)
                    .and_then(|artifacts| {
                        let metrics = score(&truth, &artifacts.predictions)?;
                        Ok(RunOutcome {
                            fraction_index: fi,
                            fraction,
                            repetition: r,
                            seeds,
                            artifacts,
                            metrics,
                        })
                    });
                outcome.map_err(|e| Error::Repetition {
                    fraction,
                    repetition: r,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Groups outcomes into one report per fraction, in configuration order.
pub fn reports_from(config: &ScenarioConfig, outcomes: &[RunOutcome]) -> Vec<EvalReport> {
    config
        .labeled_fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| {
            let rows = outcomes
                .iter()
                .filter(|o| o.fraction_index == fi)
                .map(|o| RunRow::new(o.repetition, o.seeds.run, o.metrics))
                .collect();
            EvalReport::new(fraction, rows)
        })
        .collect()
}

/// Builds the shared structures, runs the protocol, and aggregates one
/// report per labeled fraction. Ground truth must cover every item.
pub fn run_scenario(
    corpus: &Corpus,
    x: &EmbeddingMatrix,
    config: &ScenarioConfig,
) -> Result<Vec<EvalReport>> {
    config.validate()?;
    let prepared = prepare(x, &config.params)?;
    let outcomes = execute_runs(corpus, x, &prepared, config, Arm::TwoStep)?;
    Ok(reports_from(config, &outcomes))
}

/// Runs the one-step arm (final classifier on the Katz pseudo-labels) and the
/// two-step arm with identical seeds, hence identical labeled draws.
pub fn run_ablation(
    corpus: &Corpus,
    x: &EmbeddingMatrix,
    config: &ScenarioConfig,
) -> Result<Vec<AblationReport>> {
    config.validate()?;
    let prepared = prepare(x, &config.params)?;
    let one = reports_from(
        config,
        &execute_runs(corpus, x, &prepared, config, Arm::OneStep)?,
    );
    let two = reports_from(
        config,
        &execute_runs(corpus, x, &prepared, config, Arm::TwoStep)?,
    );
    one.into_iter()
        .zip(two)
        .map(|(a, b)| AblationReport::new(a, b))
        .collect()
}
