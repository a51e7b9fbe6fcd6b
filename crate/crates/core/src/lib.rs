//! Weakly supervised event recognition for short messages.
//!
//! The pipeline tokenizes a message corpus, matches event keywords, clusters
//! the keyword-matched messages on their most important words, lets an
//! annotator label whole clusters, trains a multi-channel BiLSTM classifier
//! on the result and grows the training set by bootstrapping.

pub mod bootstrap;
pub mod classifier;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph_cluster;
pub mod ontology;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod wsd;

pub use bootstrap::{bootstrap_run, BootstrapConfig, BootstrapState, ScheduleConfig};
pub use classifier::{ChannelBundle, ModelCheckpoint, Prediction, TrainConfig, TrainExample};
pub use corpus::{tokenize, Corpus, IngestReport, TokenCache, TokenizedTweet, Tweet};
pub use encoder::{EmbeddingTable, EncoderParams, EncoderRole, HiddenMatrix, ImportanceProfile};
pub use eval::{evaluate, EvalReport};
pub use error::{Error, ErrorClass, Result};
pub use graph_cluster::{build_graph, slpa_cluster, Cluster, PoolMember, SlpaConfig, TweetGraph};
pub use pipeline::{Pipeline, PipelineConfig, Predictor};
pub use ontology::{EventCategory, KeywordLexicon, LabelSet};
pub use wsd::{ClusterDecision, LabeledExample, Provenance, Verdict, WsdConfig, WsdSession};
