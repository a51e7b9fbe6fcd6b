//! Tweet similarity graphs and overlapping sense clusters.

mod graph;
mod slpa;

pub use graph::{build_graph, similarity, PoolMember, TweetGraph, MIN_SHARED_WORDS};
pub use slpa::{rank_clusters, slpa_cluster, top_words, Cluster, Community, SlpaConfig, SlpaEngine, SpeakerRule};
