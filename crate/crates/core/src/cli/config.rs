use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentConfig;
use crate::classify::ClassifyConfig;
use crate::corpus::EmbedderConfig;
use crate::error::{Error, Result};
use crate::eval::{ParamGrid, ScenarioConfig, SyntheticConfig};
use crate::gat::GatConfig;
use crate::graph::GraphConfig;
use crate::katz::KatzConfig;
use crate::lp2::Lp2Config;
use crate::pipeline::PipelineParams;

/// Where the items come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Two Gaussian clusters from the `[synthetic]` section.
    #[default]
    Synthetic,
    /// A JSON-lines dataset at `data.path`.
    Jsonl,
}

/// Where the item vectors come from (JSON-lines datasets only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// The hashed TF-IDF embedder configured in `[embedder]`.
    #[default]
    Builtin,
    /// Precomputed vectors at `data.embeddings_path`.
    File,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub embeddings: EmbeddingSource,
    pub embeddings_path: Option<PathBuf>,
}

/// The labeled-fraction protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub labeled_fractions: Vec<f64>,
    pub repetitions: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let defaults = ScenarioConfig::default();
        Self {
            labeled_fractions: defaults.labeled_fractions,
            repetitions: defaults.repetitions,
        }
    }
}

/// Everything a command needs, read from a TOML file. Unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed; every stage and repetition seed is derived from it.
    pub seed: u64,
    /// Artifact directory.
    pub output: PathBuf,
    pub data: DataConfig,
    pub synthetic: SyntheticConfig,
    pub embedder: EmbedderConfig,
    pub graph: GraphConfig,
    pub katz: KatzConfig,
    pub lp2: Lp2Config,
    pub augment: AugmentConfig,
    pub classify: ClassifyConfig,
    pub gat: GatConfig,
    pub scenario: ProtocolConfig,
    /// Candidate values for `run --grid-max`.
    pub grid: ParamGrid,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("ocgraph-out"),
            data: DataConfig::default(),
            synthetic: SyntheticConfig::default(),
            embedder: EmbedderConfig::default(),
            graph: GraphConfig::default(),
            katz: KatzConfig::default(),
            lp2: Lp2Config::default(),
            augment: AugmentConfig::default(),
            classify: ClassifyConfig::default(),
            gat: GatConfig::default(),
            scenario: ProtocolConfig::default(),
            grid: ParamGrid::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.output);
        config.data.path.as_mut().map(resolve);
        config.data.embeddings_path.as_mut().map(resolve);
        config.embedder.stopword_path.as_mut().map(resolve);
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("the config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form, with
    /// the output directory left out: the hash names the experiment, not
    /// where its artifacts live.
    pub fn hash(&self) -> String {
        let located = Self {
            output: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(located.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn params(&self) -> PipelineParams {
        PipelineParams {
            graph: self.graph,
            katz: self.katz,
            lp2: self.lp2,
            augment: self.augment,
            classify: self.classify,
            gat: self.gat,
        }
    }

    pub fn scenario(&self, jobs: usize) -> ScenarioConfig {
        ScenarioConfig {
            labeled_fractions: self.scenario.labeled_fractions.clone(),
            repetitions: self.scenario.repetitions,
            master_seed: self.seed,
            params: self.params(),
            jobs,
        }
    }

    /// Checks parameter ranges and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        let exists = |what: &str, path: &Option<PathBuf>| -> Result<()> {
            match path {
                None => Err(Error::Config(format!("{what} is required"))),
                Some(p) if !p.is_file() => Err(Error::Config(format!(
                    "{what} `{}` does not exist",
                    p.display()
                ))),
                Some(_) => Ok(()),
            }
        };
        match self.data.source {
            DataSource::Jsonl => {
                exists("data.path", &self.data.path)?;
                if self.data.embeddings == EmbeddingSource::File {
                    exists("data.embeddings_path", &self.data.embeddings_path)?;
                }
            }
            DataSource::Synthetic => {
                if self.data.embeddings == EmbeddingSource::File {
                    return Err(Error::Config(
                        "data.embeddings = \"file\" needs data.source = \"jsonl\"".into(),
                    ));
                }
            }
        }
        if self.embedder.stopword_path.is_some() {
            exists("embedder.stopword_path", &self.embedder.stopword_path)?;
        }
        if self.embedder.dim < 1 {
            return Err(Error::param("embedder.dim", "must be at least 1"));
        }
        self.scenario(1).validate()?;
        self.grid.validate(&self.params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_parameter_grids() {
        let c = PipelineConfig::parse("").unwrap();
        assert_eq!(c.graph.k, 6);
        assert_eq!(c.katz.alpha, 0.01);
        assert_eq!(c.augment.threshold, 0.3);
        assert_eq!(c.lp2.p, 0.6);
        assert_eq!(c.classify.neighbors, 5);
        assert_eq!(c.scenario.labeled_fractions, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.scenario.repetitions, 10);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::parse("sed = 1").is_err());
        assert!(PipelineConfig::parse("[katz]\nalpah = 0.1").is_err());
        assert!(PipelineConfig::parse("[nope]").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = "seed = 9\n[gat]\nepochs = 7\n[classify]\nfinal_inference = \"full\"\n[scenario]\nlabeled_fractions = [0.5]\n";
        let c = PipelineConfig::parse(text).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.gat.epochs, 7);
        assert_eq!(PipelineConfig::parse(&c.to_toml()).unwrap(), c);
        assert_ne!(c.hash(), PipelineConfig::default().hash());
        let moved = PipelineConfig {
            output: "elsewhere".into(),
            ..c.clone()
        };
        assert_eq!(moved.hash(), c.hash());
    }

    #[test]
    fn missing_files_and_bad_ranges_fail_validation() {
        let mut c = PipelineConfig::default();
        c.data.source = DataSource::Jsonl;
        assert!(c.validate().is_err());
        c.data.path = Some("/definitely/not/here.jsonl".into());
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.lp2.p = 0.0;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.scenario.labeled_fractions = vec![1.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "output = \"out\"\n[data]\npath = \"d.jsonl\"\n").unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.output, dir.path().join("out"));
        assert_eq!(c.data.path, Some(dir.path().join("d.jsonl")));
    }
}
