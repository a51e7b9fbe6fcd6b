//! Clustering-assisted manual word sense disambiguation.
//!
//! An annotator walks each category's clusters from largest to smallest,
//! reads a few sampled members and says whether the cluster uses the
//! keyword in the category's sense. [`WsdSession`] is the state behind that
//! workflow; it is a pure fold over the decisions it has accepted, so
//! replaying a journal reproduces it exactly.

mod assemble;
mod journal;
mod oracle;
mod service;

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize_with_spans;
use crate::error::{Error, Result};
use crate::graph_cluster::Cluster;
use crate::ontology::{EventCategory, KeywordLexicon, LabelSet};
use crate::seed;

pub use assemble::{assemble_labeled_set, CategoryCleaning, CleaningReport};
pub use journal::Journal;
pub use oracle::OracleAnnotator;
pub use service::AnnotationService;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Pertinent,
    OtherSense,
    OtherCategory { category: EventCategory },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDecision {
    pub cluster_id: String,
    /// Category under review.
    pub category: EventCategory,
    pub verdict: Verdict,
    pub annotator_id: String,
    /// Epoch seconds.
    pub decided_at: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Bootstrap { round: usize },
    NegativeSample,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub tweet_id: String,
    pub labels: LabelSet,
    pub provenance: Provenance,
}

impl LabeledExample {
    /// Labels are non-empty and `Other` never appears next to an event.
    pub fn is_valid(&self) -> bool {
        !self.labels.is_empty() && (!self.labels.contains(EventCategory::Other) || self.labels.len() == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WsdConfig {
    /// Stop reviewing a category after this many pertinent clusters.
    pub target_pertinent: usize,
    pub samples: usize,
    /// Accept a second decision for the same cluster as a correction.
    pub allow_supersede: bool,
}

impl Default for WsdConfig {
    fn default() -> Self {
        WsdConfig {
            target_pertinent: 20,
            samples: 5,
            allow_supersede: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub start: usize,
    pub end: usize,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub tweet_id: String,
    pub text: String,
    pub highlights: Vec<Highlight>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterView {
    pub cluster_id: String,
    pub category: EventCategory,
    pub size: usize,
    pub top_words: Vec<String>,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    TargetReached,
    QueueExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueueItem {
    Cluster(ClusterView),
    Done { category: EventCategory, reason: DoneReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryProgress {
    pub category: EventCategory,
    pub pertinent: usize,
    pub decided: usize,
    pub total_clusters: usize,
    pub done: bool,
}

/// Review queues, decisions and the sampling seed of one annotation run.
#[derive(Debug, Clone)]
pub struct WsdSession {
    config: WsdConfig,
    seed: u64,
    lexicon: KeywordLexicon,
    queues: BTreeMap<EventCategory, Vec<Cluster>>,
    cluster_category: HashMap<String, EventCategory>,
    texts: HashMap<String, String>,
    decisions: BTreeMap<(String, EventCategory), ClusterDecision>,
    journal: Vec<ClusterDecision>,
}

impl WsdSession {
    /// `queues` must already be ranked; `texts` maps tweet ids to raw text.
    pub fn new(
        config: WsdConfig,
        seed: u64,
        lexicon: KeywordLexicon,
        queues: BTreeMap<EventCategory, Vec<Cluster>>,
        texts: HashMap<String, String>,
    ) -> Result<Self> {
        let mut cluster_category = HashMap::new();
        for (cat, clusters) in &queues {
            for c in clusters {
                if cluster_category.insert(c.id.clone(), *cat).is_some() {
                    return Err(Error::InvalidDecision(format!("cluster id {} is not unique", c.id)));
                }
            }
        }
        Ok(WsdSession {
            config,
            seed,
            lexicon,
            queues,
            cluster_category,
            texts,
            decisions: BTreeMap::new(),
            journal: Vec::new(),
        })
    }

    pub fn config(&self) -> &WsdConfig {
        &self.config
    }

    pub fn queues(&self) -> &BTreeMap<EventCategory, Vec<Cluster>> {
        &self.queues
    }

    pub fn categories(&self) -> impl Iterator<Item = EventCategory> + '_ {
        self.queues.keys().copied()
    }

    /// Accepted decisions in arrival order.
    pub fn journal(&self) -> &[ClusterDecision] {
        &self.journal
    }

    /// The effective decision per `(cluster, category)`.
    pub fn decisions(&self) -> impl Iterator<Item = &ClusterDecision> {
        self.decisions.values()
    }

    pub fn decision(&self, cluster_id: &str, category: EventCategory) -> Option<&ClusterDecision> {
        self.decisions.get(&(cluster_id.to_string(), category))
    }

    pub fn progress(&self, category: EventCategory) -> CategoryProgress {
        let clusters = self.queues.get(&category).map_or(&[][..], Vec::as_slice);
        let mut pertinent = 0;
        let mut decided = 0;
        for c in clusters {
            if let Some(d) = self.decision(&c.id, category) {
                decided += 1;
                if d.verdict == Verdict::Pertinent {
                    pertinent += 1;
                }
            }
        }
        CategoryProgress {
            category,
            pertinent,
            decided,
            total_clusters: clusters.len(),
            done: pertinent >= self.config.target_pertinent || decided == clusters.len(),
        }
    }

    pub fn all_progress(&self) -> Vec<CategoryProgress> {
        self.categories().map(|c| self.progress(c)).collect()
    }

    pub fn all_done(&self) -> bool {
        self.all_progress().iter().all(|p| p.done)
    }

    /// The largest undecided cluster of the category with its samples, or
    /// the reason reviewing is over.
    pub fn next_cluster(&self, category: EventCategory) -> QueueItem {
        let progress = self.progress(category);
        if progress.pertinent >= self.config.target_pertinent {
            return QueueItem::Done {
                category,
                reason: DoneReason::TargetReached,
            };
        }
        let next = self
            .queues
            .get(&category)
            .and_then(|cs| cs.iter().find(|c| self.decision(&c.id, category).is_none()));
        match next {
            Some(c) => QueueItem::Cluster(self.view(c, category)),
            None => QueueItem::Done {
                category,
                reason: DoneReason::QueueExhausted,
            },
        }
    }

    fn view(&self, cluster: &Cluster, category: EventCategory) -> ClusterView {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, &format!("wsd/sample/{}", cluster.id)));
        let picked: Vec<&String> = cluster
            .members
            .choose_multiple(&mut rng, self.config.samples.min(cluster.size()))
            .collect();
        let samples = picked.into_iter().map(|id| self.sample(id, category)).collect();
        ClusterView {
            cluster_id: cluster.id.clone(),
            category,
            size: cluster.size(),
            top_words: cluster.top_words.clone(),
            samples,
        }
    }

    fn sample(&self, tweet_id: &str, category: EventCategory) -> Sample {
        let text = self.texts.get(tweet_id).cloned().unwrap_or_default();
        let highlights = tokenize_with_spans(&text)
            .into_iter()
            .flat_map(|(tok, (start, end))| {
                self.lexicon
                    .lookup(&tok)
                    .iter()
                    .filter(|(c, _)| *c == category)
                    .map(|(_, lemma)| Highlight {
                        start,
                        end,
                        keyword: lemma.clone(),
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Sample {
            tweet_id: tweet_id.to_string(),
            text,
            highlights,
        }
    }

    /// Validates and applies one decision; returns the category's progress.
    pub fn record_decision(&mut self, decision: ClusterDecision) -> Result<CategoryProgress> {
        match self.cluster_category.get(&decision.cluster_id) {
            None => return Err(Error::UnknownCluster(decision.cluster_id)),
            Some(&cat) if cat != decision.category => {
                return Err(Error::InvalidDecision(format!(
                    "cluster {} is queued under {cat}, not {}",
                    decision.cluster_id, decision.category
                )))
            }
            Some(_) => {}
        }
        if let Verdict::OtherCategory { category } = decision.verdict {
            if category == decision.category || !category.is_event() {
                return Err(Error::InvalidDecision(format!(
                    "other_category target must be a different event category, got {category}"
                )));
            }
        }
        let key = (decision.cluster_id.clone(), decision.category);
        if let Some(existing) = self.decisions.get(&key) {
            if !self.config.allow_supersede {
                return Err(Error::DuplicateDecision {
                    existing: Box::new(existing.clone()),
                });
            }
        }
        let category = decision.category;
        self.journal.push(decision.clone());
        self.decisions.insert(key, decision);
        Ok(self.progress(category))
    }

    /// Applies a journal in order; rejected entries are an error.
    pub fn replay<I: IntoIterator<Item = ClusterDecision>>(&mut self, decisions: I) -> Result<()> {
        for d in decisions {
            self.record_decision(d)?;
        }
        Ok(())
    }
}
