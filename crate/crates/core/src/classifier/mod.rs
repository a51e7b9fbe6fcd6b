//! Multi-channel event classifier.
//!
//! A message is represented by three max-pooled BiLSTM embeddings: the
//! message itself, a recency-weighted average over the author's preceding
//! messages and a plain average over the replies that share the most words
//! with it. Their concatenation feeds one sigmoid output per class.

mod model;
mod train;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenCache};
use crate::ontology::{EventCategory, LabelSet, NUM_CLASSES};

pub use model::{Channels, ModelCheckpoint, ModelGrads, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use train::{class_weights, sample_negatives, train, KeywordCover, TrainConfig, TrainExample, TrainReport};

pub const MAX_CONTEXTS: usize = 5;
pub const MAX_REPLIES: usize = 5;
pub const CONTEXT_DECAY: f64 = 0.8;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTokens {
    pub tokens: Vec<String>,
    pub weight: f64,
}

/// Everything the classifier reads for one message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelBundle {
    pub tweet_id: String,
    pub target: Vec<String>,
    /// Nearest first.
    pub contexts: Vec<WeightedTokens>,
    pub replies: Vec<Vec<String>>,
}

impl ChannelBundle {
    pub fn target_only(tweet_id: impl Into<String>, target: Vec<String>) -> Self {
        ChannelBundle {
            tweet_id: tweet_id.into(),
            target,
            contexts: Vec::new(),
            replies: Vec::new(),
        }
    }

    pub fn tokens_mut(&mut self) -> impl Iterator<Item = &mut Vec<String>> {
        std::iter::once(&mut self.target)
            .chain(self.contexts.iter_mut().map(|c| &mut c.tokens))
            .chain(self.replies.iter_mut())
    }
}

/// `0.8^m`, kept strictly positive for very old context.
pub fn context_weight(minutes: u64) -> f64 {
    let m = i32::try_from(minutes).unwrap_or(i32::MAX);
    CONTEXT_DECAY.powi(m).max(f64::MIN_POSITIVE)
}

/// Direct replies ranked by the number of distinct words shared with the
/// target, ties in posting order; at most five. Replies without tokens are
/// skipped.
pub fn gather_replies(corpus: &Corpus, tokens: &TokenCache, index: usize) -> Vec<usize> {
    let target: BTreeSet<&str> = tokens.tokens(index).iter().map(String::as_str).collect();
    let mut ranked: Vec<(usize, usize)> = corpus
        .replies(index)
        .iter()
        .filter(|&&r| !tokens.tokens(r).is_empty())
        .map(|&r| {
            let words: BTreeSet<&str> = tokens.tokens(r).iter().map(String::as_str).collect();
            (r, words.intersection(&target).count())
        })
        .collect();
    ranked.sort_by_key(|&(_, shared)| std::cmp::Reverse(shared));
    ranked.into_iter().take(MAX_REPLIES).map(|(r, _)| r).collect()
}

/// Target tokens, up to five preceding same-author messages with their decay
/// weights and up to five ranked replies. Context messages without tokens
/// are skipped.
pub fn bundle(corpus: &Corpus, tokens: &TokenCache, index: usize) -> ChannelBundle {
    let tweet = corpus.tweet(index);
    let contexts = corpus
        .preceding_tweets(index, usize::MAX)
        .into_iter()
        .filter(|&(i, _)| !tokens.tokens(i).is_empty())
        .take(MAX_CONTEXTS)
        .map(|(i, m)| WeightedTokens {
            tokens: tokens.tokens(i).to_vec(),
            weight: context_weight(m),
        })
        .collect();
    let replies = gather_replies(corpus, tokens, index)
        .into_iter()
        .map(|r| tokens.tokens(r).to_vec())
        .collect();
    ChannelBundle {
        tweet_id: tweet.id.clone(),
        target: tokens.tokens(index).to_vec(),
        contexts,
        replies,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tweet_id: String,
    /// One score per class in ordinal order.
    pub scores: Vec<f64>,
    pub labels: LabelSet,
}

impl Prediction {
    /// Event classes scoring at least `threshold`, or `{Other}` if none do.
    pub fn from_scores(tweet_id: impl Into<String>, scores: Vec<f64>, threshold: f64) -> Self {
        debug_assert_eq!(scores.len(), NUM_CLASSES);
        let labels = EventCategory::EVENTS
            .into_iter()
            .filter(|c| scores[c.ordinal()] >= threshold)
            .collect::<LabelSet>()
            .normalized();
        Prediction {
            tweet_id: tweet_id.into(),
            scores,
            labels,
        }
    }

    /// Highest event-class score.
    pub fn confidence(&self) -> f64 {
        EventCategory::EVENTS
            .into_iter()
            .map(|c| self.scores[c.ordinal()])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
