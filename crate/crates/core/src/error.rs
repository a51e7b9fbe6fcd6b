use std::path::PathBuf;

use crate::wsd::ClusterDecision;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss on example {example_id}")]
    NonFiniteLoss { example_id: String },

    #[error("training set needs at least 2 distinct classes, found {found}")]
    TooFewClasses { found: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("bootstrap round {round}: {source}")]
    Bootstrap {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown cluster {0}")]
    UnknownCluster(String),

    #[error("unknown tweet {0}")]
    UnknownTweet(String),

    #[error("cluster {} already decided for {}", .existing.cluster_id, .existing.category)]
    DuplicateDecision { existing: Box<ClusterDecision> },

    #[error("invalid decision: {0}")]
    InvalidDecision(String),

    #[error("prediction/gold id mismatch: missing from predictions {missing_in_predictions:?}, missing from gold {missing_in_gold:?}")]
    IdMismatch {
        missing_in_predictions: Vec<String>,
        missing_in_gold: Vec<String>,
    },

    #[error("missing {artifact} artifact (run `{stage}` first)")]
    MissingArtifact {
        artifact: &'static str,
        stage: &'static str,
    },

    #[error("workdir {0} is locked by another pipeline instance")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::Io(_) | Error::Locked(_) => ErrorClass::Internal,
            Error::Bootstrap { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
