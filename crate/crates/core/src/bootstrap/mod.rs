//! Self-training under a descending confidence threshold.
//!
//! Each round labels the unlabeled pool with the current model, adopts the
//! messages whose best event score clears the threshold and retrains from
//! scratch with keyword covering. The threshold drops by one step whenever
//! a round adopts fewer than `min_selected` messages; a drop below the floor
//! ends the run.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{sample_negatives, train, ChannelBundle, KeywordCover, ModelCheckpoint, TrainConfig, TrainExample, TrainReport};
use crate::encoder::{EmbeddingTable, UNK_TOKEN};
use crate::error::{Error, Result};
use crate::ontology::{EventCategory, KeywordLexicon, LabelSet};
use crate::seed;
use crate::wsd::{LabeledExample, Provenance};

/// Replaces each keyword position by the cover token with probability `rate`.
pub fn keyword_dropout<S: AsRef<str>>(tokens: &[S], positions: &[usize], rate: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
    for &p in positions {
        if rng.random::<f64>() < rate {
            out[p] = UNK_TOKEN.to_string();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub start: f64,
    pub step: f64,
    pub floor: f64,
    pub min_selected: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            start: 0.9,
            step: 0.1,
            floor: 0.5,
            min_selected: 100,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.start)
            && (0.0..=1.0).contains(&self.floor)
            && self.floor <= self.start
            && self.step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("bootstrap schedule needs 0 <= floor <= start <= 1 and a positive step".into()))
        }
    }

    /// Threshold after `drops` decrements, rounded to remove float noise.
    pub fn threshold_at(&self, drops: usize) -> f64 {
        ((self.start - self.step * drops as f64) * 1e9).round() / 1e9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub threshold: f64,
    pub selected: usize,
    pub per_class: BTreeMap<EventCategory, usize>,
    pub selected_ids: Vec<String>,
    /// Threshold for the following round; `None` once the run terminated.
    pub next_threshold: Option<f64>,
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapState {
    pub schedule: ScheduleConfig,
    pub round: usize,
    drops: usize,
    pub terminated: bool,
    pub history: Vec<RoundRecord>,
    pub added: Vec<LabeledExample>,
}

impl BootstrapState {
    pub fn new(schedule: ScheduleConfig) -> Self {
        BootstrapState {
            schedule,
            round: 0,
            drops: 0,
            terminated: false,
            history: Vec::new(),
            added: Vec::new(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.schedule.threshold_at(self.drops)
    }

    /// Moves the schedule on after a round that adopted `selected` messages
    /// and returns the next threshold, or `None` when the run is over.
    pub fn advance(&mut self, selected: usize) -> Option<f64> {
        self.round += 1;
        if selected < self.schedule.min_selected {
            if self.schedule.threshold_at(self.drops + 1) < self.schedule.floor - 1e-9 {
                self.terminated = true;
                return None;
            }
            self.drops += 1;
        }
        Some(self.threshold())
    }

    /// Rebuilds the threshold sequence from a round journal.
    pub fn replay_thresholds(schedule: &ScheduleConfig, history: &[RoundRecord]) -> Vec<Option<f64>> {
        let mut s = BootstrapState::new(schedule.clone());
        history.iter().map(|r| s.advance(r.selected)).collect()
    }
}

/// Scores the pool, adopts messages whose best event score reaches the
/// threshold (labelled with every event class at or above it) and removes
/// them from the pool. The returned record has `retrained == false`.
pub fn bootstrap_round(
    state: &mut BootstrapState,
    model: &ModelCheckpoint,
    emb: &EmbeddingTable,
    pool: &mut Vec<ChannelBundle>,
) -> Result<(Vec<LabeledExample>, RoundRecord)> {
    let threshold = state.threshold();
    let round = state.round + 1;
    if pool.is_empty() {
        state.terminated = true;
        let record = RoundRecord {
            round,
            threshold,
            selected: 0,
            per_class: BTreeMap::new(),
            selected_ids: Vec::new(),
            next_threshold: None,
            retrained: false,
        };
        return Ok((Vec::new(), record));
    }
    let scores: Vec<Vec<f64>> = pool
        .par_iter()
        .map(|b| model.forward(emb, b))
        .collect::<Result<_>>()?;
    let mut selected = Vec::new();
    let mut keep = Vec::with_capacity(pool.len());
    for (b, s) in pool.drain(..).zip(scores) {
        let labels: LabelSet = EventCategory::EVENTS
            .into_iter()
            .filter(|c| s[c.ordinal()] >= threshold)
            .collect();
        if labels.is_empty() {
            keep.push(b);
        } else {
            selected.push(LabeledExample {
                tweet_id: b.tweet_id,
                labels,
                provenance: Provenance::Bootstrap { round },
            });
        }
    }
    *pool = keep;
    let mut per_class = BTreeMap::new();
    for e in &selected {
        for c in e.labels.iter() {
            *per_class.entry(c).or_insert(0) += 1;
        }
    }
    let next_threshold = state.advance(selected.len());
    if pool.is_empty() {
        state.terminated = true;
    }
    let record = RoundRecord {
        round,
        threshold,
        selected: selected.len(),
        per_class,
        selected_ids: selected.iter().map(|e| e.tweet_id.clone()).collect(),
        next_threshold: if state.terminated { None } else { next_threshold },
        retrained: false,
    };
    state.added.extend(selected.iter().cloned());
    Ok((selected, record))
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig<'a> {
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub dropout_rate: f64,
    pub lexicon: &'a KeywordLexicon,
    pub seed: u64,
}

/// Seed of the negatives drawn for the seed classifier.
pub fn seed_negatives(base: u64) -> u64 {
    seed::derive(base, "bootstrap/negatives/0")
}

#[derive(Debug, Clone)]
pub struct BootstrapOutcome {
    pub seed_model: ModelCheckpoint,
    pub model: ModelCheckpoint,
    pub state: BootstrapState,
    /// One per training run, in order.
    pub reports: Vec<TrainReport>,
}

/// The labelled examples plus as many sampled `Other` negatives as there
/// are event-labelled examples.
pub fn training_set(
    labeled: &[LabeledExample],
    negative_pool: &[String],
    bundles: &HashMap<String, ChannelBundle>,
    seed: u64,
) -> Result<Vec<TrainExample>> {
    let positives = labeled.iter().filter(|e| e.labels.has_event()).count();
    let exclude: HashSet<String> = labeled.iter().map(|e| e.tweet_id.clone()).collect();
    let (negatives, warning) = sample_negatives(negative_pool, &exclude, positives, seed);
    if let Some(w) = warning {
        log::warn!("{w}");
    }
    labeled
        .iter()
        .chain(&negatives)
        .map(|e| {
            let bundle = bundles.get(&e.tweet_id).ok_or_else(|| Error::UnknownTweet(e.tweet_id.clone()))?;
            Ok(TrainExample {
                bundle: bundle.clone(),
                labels: e.labels,
            })
        })
        .collect()
}

/// Trains the seed classifier (unless `seed_model` is given), then runs
/// rounds until the schedule ends.
///
/// `pool` lists the unlabeled messages, which are both the bootstrap
/// candidates and the source of negatives; every id in `labeled` and `pool`
/// needs an entry in `bundles`. Each training run samples as many negatives
/// as there are event-labelled examples. Rounds that adopt nothing keep the
/// previous model.
pub fn bootstrap_run(
    labeled: &[LabeledExample],
    pool: &[String],
    bundles: &HashMap<String, ChannelBundle>,
    emb: &EmbeddingTable,
    config: &BootstrapConfig<'_>,
    seed_model: Option<ModelCheckpoint>,
) -> Result<BootstrapOutcome> {
    config.schedule.validate()?;
    if !(0.0..=1.0).contains(&config.dropout_rate) {
        return Err(Error::Config("dropout rate must be in [0, 1]".into()));
    }
    let negative_pool: Vec<String> = pool.to_vec();
    let mut current: Vec<LabeledExample> = labeled.to_vec();
    let mut reports = Vec::new();
    let seed_model = match seed_model {
        Some(m) => m,
        None => {
            let set = training_set(&current, &negative_pool, bundles, seed_negatives(config.seed))?;
            let (m, report) = train(&set, emb, &config.train, None)?;
            reports.push(report);
            m
        }
    };
    let mut model = seed_model.clone();

    let labeled_ids: HashSet<&str> = labeled.iter().map(|e| e.tweet_id.as_str()).collect();
    let mut candidates: Vec<ChannelBundle> = pool
        .iter()
        .filter(|id| !labeled_ids.contains(id.as_str()))
        .map(|id| bundles.get(id).cloned().ok_or_else(|| Error::UnknownTweet(id.clone())))
        .collect::<Result<_>>()?;
    candidates.retain(|b| !b.target.is_empty());

    let mut state = BootstrapState::new(config.schedule.clone());
    if candidates.is_empty() {
        state.terminated = true;
    }
    let cover = KeywordCover {
        lexicon: config.lexicon,
        rate: config.dropout_rate,
    };
    while !state.terminated {
        let round = state.round + 1;
        let wrap = |e: Error| Error::Bootstrap {
            round,
            source: Box::new(e),
        };
        let (selected, mut record) = bootstrap_round(&mut state, &model, emb, &mut candidates).map_err(wrap)?;
        log::info!(
            "bootstrap round {round}: threshold {:.1}, adopted {}",
            record.threshold,
            record.selected
        );
        if !selected.is_empty() {
            current.extend(selected);
            let set = training_set(
                &current,
                &negative_pool,
                bundles,
                seed::derive(config.seed, &format!("bootstrap/negatives/{round}")),
            )
            .map_err(wrap)?;
            let (m, report) = train(&set, emb, &config.train, Some(cover)).map_err(wrap)?;
            model = m;
            reports.push(report);
            record.retrained = true;
        }
        state.history.push(record);
    }
    Ok(BootstrapOutcome {
        seed_model,
        model,
        state,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn schedule_trace() {
        let mut s = BootstrapState::new(ScheduleConfig::default());
        let got: Vec<Option<f64>> = [150, 80, 120, 50, 90, 60, 40].iter().map(|&n| s.advance(n)).collect();
        assert_eq!(got, [Some(0.9), Some(0.8), Some(0.8), Some(0.7), Some(0.6), Some(0.5), None]);
        assert!(s.terminated);
    }

    #[test]
    fn quiet_rounds_stop_after_five() {
        let mut s = BootstrapState::new(ScheduleConfig::default());
        let mut rounds = 0;
        let mut seen = Vec::new();
        while !s.terminated {
            seen.push(s.threshold());
            s.advance(0);
            rounds += 1;
        }
        assert_eq!(rounds, 5);
        assert_eq!(seen, [0.9, 0.8, 0.7, 0.6, 0.5]);
    }

    #[test]
    fn dropout_extremes_and_rate() {
        let toks: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let pos = [1, 4, 7];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(keyword_dropout(&toks, &pos, 0.0, &mut rng), toks);
        let all = keyword_dropout(&toks, &pos, 1.0, &mut rng);
        for (i, t) in all.iter().enumerate() {
            assert_eq!(t == UNK_TOKEN, pos.contains(&i));
        }
        let many: Vec<String> = vec!["k".into(); 10_000];
        let positions: Vec<usize> = (0..10_000).collect();
        let covered = keyword_dropout(&many, &positions, 0.2, &mut rng).iter().filter(|t| *t == UNK_TOKEN).count();
        assert!((1800..=2200).contains(&covered), "{covered}");
    }
}
