//! Multi-label evaluation, the unsupervised baselines' label rules and
//! hourly trend tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_cluster::{similarity, Cluster, PoolMember, MIN_SHARED_WORDS};
use crate::ontology::{EventCategory, KeywordLexicon, LabelSet, NUM_CLASSES, NUM_EVENTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: EventCategory,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold positives.
    pub support: usize,
    /// Neither predicted nor present in gold.
    pub empty: bool,
}

impl CategoryMetrics {
    fn from_counts(category: EventCategory, tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        CategoryMetrics {
            category,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            support: tp + fn_,
            empty: tp + fp + fn_ == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    /// All ten classes in ordinal order.
    pub categories: Vec<CategoryMetrics>,
    /// Unweighted means over the nine event categories.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Event categories that were neither predicted nor present in gold.
    pub flagged: Vec<EventCategory>,
}

impl EvalReport {
    pub fn category(&self, c: EventCategory) -> &CategoryMetrics {
        &self.categories[c.ordinal()]
    }

    /// Fixed-width table in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<6} {:>7} {:>7} {:>7} {:>8}", "class", "P", "R", "F1", "support");
        for m in &self.categories {
            let flag = if m.empty { " *" } else { "" };
            let _ = writeln!(
                out,
                "{:<6} {:>7.1} {:>7.1} {:>7.1} {:>8}{flag}",
                m.category.code(),
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                m.support
            );
        }
        let _ = writeln!(
            out,
            "{:<6} {:>7.1} {:>7.1} {:>7.1} {:>8}",
            "macro",
            100.0 * self.macro_precision,
            100.0 * self.macro_recall,
            100.0 * self.macro_f1,
            self.instances
        );
        if !self.flagged.is_empty() {
            let _ = writeln!(out, "* no predictions and no gold positives");
        }
        out
    }
}

/// Per-label confusion over the ids shared by both maps; both must cover the
/// same ids.
pub fn evaluate(predictions: &BTreeMap<String, LabelSet>, gold: &BTreeMap<String, LabelSet>) -> Result<EvalReport> {
    let missing_in_predictions: Vec<String> = gold.keys().filter(|k| !predictions.contains_key(*k)).cloned().collect();
    let missing_in_gold: Vec<String> = predictions.keys().filter(|k| !gold.contains_key(*k)).cloned().collect();
    if !missing_in_predictions.is_empty() || !missing_in_gold.is_empty() {
        return Err(Error::IdMismatch {
            missing_in_predictions,
            missing_in_gold,
        });
    }
    let mut counts = [[0usize; 3]; NUM_CLASSES];
    for (id, g) in gold {
        let p = predictions[id];
        for c in EventCategory::ALL {
            let slot = &mut counts[c.ordinal()];
            match (p.contains(c), g.contains(c)) {
                (true, true) => slot[0] += 1,
                (true, false) => slot[1] += 1,
                (false, true) => slot[2] += 1,
                (false, false) => {}
            }
        }
    }
    let categories: Vec<CategoryMetrics> = EventCategory::ALL
        .into_iter()
        .map(|c| {
            let [tp, fp, fn_] = counts[c.ordinal()];
            CategoryMetrics::from_counts(c, tp, fp, fn_)
        })
        .collect();
    let events = || EventCategory::EVENTS.into_iter().map(|c| &categories[c.ordinal()]);
    let mean = |f: fn(&CategoryMetrics) -> f64| events().map(f).sum::<f64>() / NUM_EVENTS as f64;
    Ok(EvalReport {
        instances: gold.len(),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        flagged: events().filter(|m| m.empty).map(|m| m.category).collect(),
        categories,
    })
}

/// Categories whose keywords occur among a cluster's top words.
pub fn cluster_categories(cluster: &Cluster, lexicon: &KeywordLexicon) -> LabelSet {
    cluster
        .top_words
        .iter()
        .flat_map(|w| lexicon.lookup(w).iter().map(|(c, _)| *c))
        .collect()
}

/// Labelled neighbourhood used by the clustering baseline.
#[derive(Debug, Clone)]
pub struct SlpaBaseline {
    members: Vec<(PoolMember, LabelSet)>,
    postings: HashMap<String, Vec<usize>>,
}

impl SlpaBaseline {
    /// Labels every member of a category-bearing cluster with the union of
    /// its clusters' categories; members of no such cluster are left out.
    pub fn from_clusters(pool: &[PoolMember], clusters: &[Cluster], lexicon: &KeywordLexicon) -> Self {
        let mut labels: BTreeMap<&str, LabelSet> = BTreeMap::new();
        for c in clusters {
            let l = cluster_categories(c, lexicon);
            if l.is_empty() {
                continue;
            }
            for m in &c.members {
                let e = labels.entry(m.as_str()).or_default();
                *e = l.iter().chain(e.iter()).collect();
            }
        }
        let members = pool
            .iter()
            .filter_map(|m| labels.get(m.tweet_id.as_str()).map(|l| (m.clone(), *l)))
            .collect();
        Self::new(members)
    }

    pub fn new(members: Vec<(PoolMember, LabelSet)>) -> Self {
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, (m, _)) in members.iter().enumerate() {
            for w in &m.selected {
                postings.entry(w.clone()).or_default().push(i);
            }
        }
        SlpaBaseline { members, postings }
    }

    /// Majority event label among graph neighbours, ties to the larger summed
    /// edge weight and then the smaller ordinal; `{Other}` without votes.
    pub fn predict(&self, target: &PoolMember) -> LabelSet {
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for w in &target.selected {
            for &i in self.postings.get(w).map_or(&[][..], Vec::as_slice) {
                *shared.entry(i).or_default() += 1;
            }
        }
        let neighbours = shared
            .into_iter()
            .filter(|&(i, n)| n >= MIN_SHARED_WORDS && self.members[i].0.tweet_id != target.tweet_id)
            .map(|(i, _)| (&self.members[i], similarity(target, &self.members[i].0)));
        vote(neighbours.map(|((_, l), w)| (*l, w)))
    }
}

fn vote<I: IntoIterator<Item = (LabelSet, f64)>>(neighbours: I) -> LabelSet {
    let mut tally = [(0usize, 0.0f64); NUM_CLASSES];
    for (labels, w) in neighbours {
        for c in labels.events_only().iter() {
            tally[c.ordinal()].0 += 1;
            tally[c.ordinal()].1 += w;
        }
    }
    let mut best: Option<EventCategory> = None;
    for c in EventCategory::EVENTS {
        let t = tally[c.ordinal()];
        if t.0 == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let bt = tally[b.ordinal()];
                t.0 > bt.0 || (t.0 == bt.0 && t.1 > bt.1)
            }
        };
        if better {
            best = Some(c);
        }
    }
    best.map_or(LabelSet::other(), LabelSet::single)
}

/// Brute-force form of [`SlpaBaseline::predict`].
pub fn slpa_baseline_predict(target: &PoolMember, labeled: &[(PoolMember, LabelSet)]) -> LabelSet {
    vote(labeled.iter().filter_map(|(m, l)| {
        let shared = m.selected.intersection(&target.selected).count();
        (shared >= MIN_SHARED_WORDS && m.tweet_id != target.tweet_id).then(|| (*l, similarity(target, m)))
    }))
}

/// Messages per class and UTC hour.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    /// Start of each hour (epoch seconds) to per-class counts in ordinal order.
    pub buckets: BTreeMap<i64, Vec<usize>>,
}

impl TrendTable {
    pub fn count(&self, hour_start: i64, c: EventCategory) -> usize {
        self.buckets.get(&hour_start).map_or(0, |v| v[c.ordinal()])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("hour");
        for c in EventCategory::ALL {
            out.push(',');
            out.push_str(c.code());
        }
        out.push('\n');
        for (&h, counts) in &self.buckets {
            let stamp = Utc
                .timestamp_opt(h, 0)
                .single()
                .map_or_else(|| h.to_string(), |t| t.format("%Y-%m-%dT%H:00:00Z").to_string());
            out.push_str(&stamp);
            for n in counts {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
        }
        out
    }
}

/// Counts each labelled message once per class in its label set.
pub fn trend_counts<I: IntoIterator<Item = (i64, LabelSet)>>(items: I) -> TrendTable {
    let mut buckets: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (ts, labels) in items {
        let hour = ts.div_euclid(3600) * 3600;
        let row = buckets.entry(hour).or_insert_with(|| vec![0; NUM_CLASSES]);
        for c in labels.iter() {
            row[c.ordinal()] += 1;
        }
    }
    TrendTable { buckets }
}
