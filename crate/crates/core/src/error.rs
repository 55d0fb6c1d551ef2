use std::fmt;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage names, used to attribute failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Embed,
    Graph,
    Katz,
    Lp2,
    Augment,
    Classify,
    Score,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Embed,
        Stage::Graph,
        Stage::Katz,
        Stage::Lp2,
        Stage::Augment,
        Stage::Classify,
        Stage::Score,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Embed => "embed",
            Stage::Graph => "graph",
            Stage::Katz => "katz",
            Stage::Lp2 => "lp2",
            Stage::Augment => "augment",
            Stage::Classify => "classify",
            Stage::Score => "score",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("katz validation failed: alpha {alpha} must lie in [0, 1/{eigenvalue}) for the series to converge")]
    AlphaOutOfRange { alpha: f64, eigenvalue: f64 },

    #[error("katz system (I - alpha*A) is singular")]
    SingularSystem,

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("non-finite value produced in layer {layer}")]
    NonFinite { layer: usize },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("initial classifier assigned no unlabeled node to the {class} class")]
    EmptyPredictedClass { class: &'static str },

    #[error("missing artifact {} (run the earlier stages first)", .0.display())]
    MissingArtifact(PathBuf),

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("fraction {fraction}, repetition {repetition}: {source}")]
    Repetition {
        fraction: f64,
        repetition: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// The stage a failure is attributed to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            Error::Repetition { source, .. } => source.stage(),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|source| match source {
            already @ Error::Stage { .. } => already,
            source => Error::Stage {
                stage,
                source: Box::new(source),
            },
        })
    }
}
