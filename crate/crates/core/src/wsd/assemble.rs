use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ClusterDecision, LabeledExample, Provenance, Verdict};
use crate::graph_cluster::Cluster;
use crate::ontology::{EventCategory, LabelSet};

/// Kept and removed keyword tweets for one reviewed category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCleaning {
    pub category: EventCategory,
    pub keyword_tweets: usize,
    pub positives: usize,
    pub other: usize,
    /// Tweets moved to a different event category.
    pub relabeled: usize,
    pub removed: usize,
    pub removal_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub categories: Vec<CategoryCleaning>,
    pub warnings: Vec<String>,
}

impl CleaningReport {
    pub fn total_keyword_tweets(&self) -> usize {
        self.categories.iter().map(|c| c.keyword_tweets).sum()
    }

    pub fn total_removed(&self) -> usize {
        self.categories.iter().map(|c| c.removed).sum()
    }
}

/// Turns cluster verdicts into tweet labels.
///
/// Members of a pertinent cluster get the reviewed category, members of an
/// `other_category` cluster get the named category and members of an
/// `other_sense` cluster get `Other`. Event labels from different categories
/// accumulate; `Other` only survives when no event label was assigned.
/// Keyword tweets of a category that end up in no decided cluster are counted
/// as removed. The output is sorted by tweet id.
pub fn assemble_labeled_set<'a, I>(
    decisions: I,
    queues: &BTreeMap<EventCategory, Vec<Cluster>>,
    keyword_tweets: &BTreeMap<EventCategory, BTreeSet<String>>,
) -> (Vec<LabeledExample>, CleaningReport)
where
    I: IntoIterator<Item = &'a ClusterDecision>,
{
    let mut by_cluster: BTreeMap<(EventCategory, &str), Verdict> = BTreeMap::new();
    for d in decisions {
        by_cluster.insert((d.category, d.cluster_id.as_str()), d.verdict);
    }

    let mut labels: BTreeMap<String, LabelSet> = BTreeMap::new();
    let mut report = CleaningReport::default();
    let categories: BTreeSet<EventCategory> = queues.keys().chain(keyword_tweets.keys()).copied().collect();
    for cat in categories {
        let mut positives = BTreeSet::new();
        let mut other = BTreeSet::new();
        let mut relabeled = BTreeSet::new();
        for cluster in queues.get(&cat).map_or(&[][..], Vec::as_slice) {
            let Some(verdict) = by_cluster.get(&(cat, cluster.id.as_str())) else {
                continue;
            };
            for id in &cluster.members {
                let entry = labels.entry(id.clone()).or_default();
                match verdict {
                    Verdict::Pertinent => {
                        entry.insert(cat);
                        positives.insert(id.as_str());
                    }
                    Verdict::OtherSense => {
                        entry.insert(EventCategory::Other);
                        other.insert(id.as_str());
                    }
                    Verdict::OtherCategory { category } => {
                        entry.insert(*category);
                        relabeled.insert(id.as_str());
                    }
                }
            }
        }
        let pool = keyword_tweets.get(&cat).cloned().unwrap_or_default();
        let kept = pool
            .iter()
            .filter(|id| positives.contains(id.as_str()) || other.contains(id.as_str()) || relabeled.contains(id.as_str()))
            .count();
        let removed = pool.len() - kept;
        if positives.is_empty() {
            report.warnings.push(format!("{cat}: no pertinent clusters, category has zero positives"));
        }
        report.categories.push(CategoryCleaning {
            category: cat,
            keyword_tweets: pool.len(),
            positives: positives.len(),
            other: other.len(),
            relabeled: relabeled.len(),
            removed,
            removal_rate: if pool.is_empty() { 0.0 } else { removed as f64 / pool.len() as f64 },
        });
    }

    let examples = labels
        .into_iter()
        .map(|(tweet_id, l)| LabeledExample {
            tweet_id,
            labels: l.normalized(),
            provenance: Provenance::Seed,
        })
        .collect();
    (examples, report)
}
