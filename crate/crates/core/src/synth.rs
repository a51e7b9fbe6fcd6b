//! Seeded synthetic disaster-message corpora with planted ground truth.
//!
//! Every event category gets ambiguous keywords taken from the lexicon.
//! A keyword message either uses the event sense (keyword plus words from
//! the category's core vocabulary) or an unrelated sense (keyword plus that
//! keyword's off-sense vocabulary, gold `Other`). Event messages without any
//! keyword draw from the core and an extended vocabulary, so only a model
//! that learns beyond the keywords finds them. Background chatter fills the
//! rest. Messages before `test_start` form the unlabeled training period;
//! originals after it are the evaluation set.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::encoder::EmbeddingTable;
use crate::error::Result;
use crate::ontology::{EventCategory, KeywordLexicon, LabelSet};
use crate::pipeline::{Paths, PipelineConfig};
use crate::seed;

const STOPWORDS: &[&str] = &[
    "the", "a", "is", "in", "on", "at", "to", "of", "and", "we", "i", "it", "this", "my", "our", "now", "so", "just",
    "for", "with", "are", "be", "all", "you",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub keywords_per_category: usize,
    pub off_sense_rate: f64,
    pub core_vocab: usize,
    pub extended_vocab: usize,
    pub off_sense_vocab: usize,
    pub background_vocab: usize,
    pub train_keyword: usize,
    pub train_plain: usize,
    pub train_background: usize,
    pub test_keyword: usize,
    pub test_plain: usize,
    pub test_background: usize,
    /// Share of keyword-free event messages that also carry a second category.
    pub multi_label_rate: f64,
    pub authors: usize,
    pub reply_rate: f64,
    pub retweet_rate: f64,
    pub embedding_dim: usize,
    /// Length scale of stopword vectors relative to content words.
    pub stopword_scale: f64,
    /// Spread of sense words around their sense centroid; background words
    /// and keywords have no centroid.
    pub sense_noise: f64,
    pub start_time: i64,
    pub train_hours: i64,
    pub test_hours: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            keywords_per_category: 2,
            off_sense_rate: 0.3,
            core_vocab: 6,
            extended_vocab: 8,
            off_sense_vocab: 6,
            background_vocab: 400,
            train_keyword: 100,
            train_plain: 50,
            train_background: 2500,
            test_keyword: 20,
            test_plain: 20,
            test_background: 400,
            multi_label_rate: 0.05,
            authors: 500,
            reply_rate: 0.15,
            retweet_rate: 0.05,
            embedding_dim: 16,
            stopword_scale: 0.2,
            sense_noise: 0.5,
            start_time: 1_503_878_400,
            train_hours: 12,
            test_hours: 1,
        }
    }
}

/// Sense vocabulary planted for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryVocab {
    pub keywords: Vec<String>,
    pub core: Vec<String>,
    pub extended: Vec<String>,
    /// One list per keyword, same order.
    pub off_sense: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub tweets: Vec<Tweet>,
    /// Gold labels of every original.
    pub truth: BTreeMap<String, LabelSet>,
    /// Originals of the test period.
    pub eval_ids: Vec<String>,
    pub test_start: i64,
    pub embeddings: EmbeddingTable,
    pub vocab: BTreeMap<EventCategory, CategoryVocab>,
}

struct Words {
    used: BTreeSet<String>,
}

impl Words {
    fn fresh(&mut self, rng: &mut ChaCha8Rng, lexicon: &KeywordLexicon) -> String {
        const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st"];
        const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
        loop {
            let syll = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syll {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            if rng.random_bool(0.5) {
                w.push_str(["n", "r", "x", "l"].choose(rng).unwrap());
            }
            if !lexicon.is_keyword(&w) && !STOPWORDS.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn many(&mut self, n: usize, rng: &mut ChaCha8Rng, lexicon: &KeywordLexicon) -> Vec<String> {
        (0..n).map(|_| self.fresh(rng, lexicon)).collect()
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, from: &'a [String], n: usize) -> impl Iterator<Item = &'a String> {
    from.choose_multiple(rng, n.min(from.len()))
}

fn filler(rng: &mut ChaCha8Rng, background: &[String], out: &mut Vec<String>) {
    for _ in 0..rng.random_range(2..=4) {
        out.push(STOPWORDS.choose(rng).unwrap().to_string());
    }
    let n = rng.random_range(0..=2);
    for w in pick(rng, background, n) {
        out.push(w.clone());
    }
}

fn render(rng: &mut ChaCha8Rng, mut words: Vec<String>, hashtag_ok: &BTreeSet<&str>) -> String {
    words.shuffle(rng);
    let mut parts: Vec<String> = words
        .into_iter()
        .map(|w| {
            if hashtag_ok.contains(w.as_str()) && rng.random_bool(0.15) {
                format!("#{w}")
            } else if rng.random_bool(0.1) {
                w.to_uppercase()
            } else {
                w
            }
        })
        .collect();
    if rng.random_bool(0.2) {
        parts.push(format!("https://t.co/{:06x}", rng.random::<u32>() & 0xff_ffff));
    }
    if rng.random_bool(0.1) {
        parts.insert(0, format!("@user{}", rng.random_range(0..1000)));
    }
    parts.join(" ")
}

enum Kind {
    OnSense(EventCategory),
    OffSense(EventCategory, usize),
    Plain(EventCategory),
    Background,
}

/// Generates a corpus, its ground truth and matching word vectors.
pub fn generate(config: &SynthConfig, lexicon: &KeywordLexicon) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "synth/text"));
    let mut words = Words { used: BTreeSet::new() };
    let mut vocab = BTreeMap::new();
    for cat in EventCategory::EVENTS {
        let keywords: Vec<String> = lexicon.lemmas(cat).iter().take(config.keywords_per_category).cloned().collect();
        let off_sense = keywords
            .iter()
            .map(|_| words.many(config.off_sense_vocab, &mut rng, lexicon))
            .collect();
        vocab.insert(
            cat,
            CategoryVocab {
                core: words.many(config.core_vocab, &mut rng, lexicon),
                extended: words.many(config.extended_vocab, &mut rng, lexicon),
                off_sense,
                keywords,
            },
        );
    }
    let background = words.many(config.background_vocab, &mut rng, lexicon);
    let content: BTreeSet<&str> = words.used.iter().map(String::as_str).collect();

    let surface = |rng: &mut ChaCha8Rng, cat: EventCategory, k: usize| -> String {
        let lemma = &vocab[&cat].keywords[k];
        let forms: Vec<&String> = lexicon.surface_forms(cat, lemma).map(|f| f.iter().collect()).unwrap_or_default();
        forms.choose(rng).map_or_else(|| lemma.clone(), |f| (*f).clone())
    };

    let mut plan: Vec<(bool, Kind)> = Vec::new();
    for test in [false, true] {
        let (kw, plain, bg) = if test {
            (config.test_keyword, config.test_plain, config.test_background)
        } else {
            (config.train_keyword, config.train_plain, config.train_background)
        };
        for cat in EventCategory::EVENTS {
            let nk = vocab[&cat].keywords.len().max(1);
            let off = (kw as f64 * config.off_sense_rate).round() as usize;
            for i in 0..kw {
                let k = i % nk;
                plan.push((test, if i < off { Kind::OffSense(cat, k) } else { Kind::OnSense(cat) }));
            }
            for _ in 0..plain {
                plan.push((test, Kind::Plain(cat)));
            }
        }
        for _ in 0..bg {
            plan.push((test, Kind::Background));
        }
    }
    plan.shuffle(&mut rng);

    let test_start = config.start_time + config.train_hours * 3600;
    let mut tweets = Vec::new();
    let mut truth = BTreeMap::new();
    let mut eval_ids = Vec::new();
    let mut next_id = 0usize;
    let mut new_id = || {
        next_id += 1;
        format!("{}", 100_000_000 + next_id)
    };
    let author = |rng: &mut ChaCha8Rng| format!("u{:04}", rng.random_range(0..config.authors.max(1)));

    for (test, kind) in plan {
        let (start, hours) = if test {
            (test_start, config.test_hours)
        } else {
            (config.start_time, config.train_hours)
        };
        let created_at = start + rng.random_range(0..(hours * 3600).max(1));
        let mut toks = Vec::new();
        let labels = match kind {
            Kind::OnSense(cat) => {
                let v = &vocab[&cat];
                let k = rng.random_range(0..v.keywords.len());
                toks.push(surface(&mut rng, cat, k));
                toks.extend(pick(&mut rng, &v.core, 3).cloned());
                if rng.random_bool(0.3) {
                    toks.extend(pick(&mut rng, &v.extended, 1).cloned());
                }
                LabelSet::single(cat)
            }
            Kind::OffSense(cat, k) => {
                toks.push(surface(&mut rng, cat, k));
                toks.extend(pick(&mut rng, &vocab[&cat].off_sense[k], 3).cloned());
                LabelSet::other()
            }
            Kind::Plain(cat) => {
                let v = &vocab[&cat];
                let n_core = rng.random_range(1..=2);
                toks.extend(pick(&mut rng, &v.core, n_core).cloned());
                toks.extend(pick(&mut rng, &v.extended, 4 - n_core).cloned());
                let mut l = LabelSet::single(cat);
                if rng.random_bool(config.multi_label_rate) {
                    let other = *EventCategory::EVENTS.iter().filter(|&&c| c != cat).collect::<Vec<_>>().choose(&mut rng).unwrap();
                    toks.extend(pick(&mut rng, &vocab[other].core, 2).cloned());
                    l.insert(*other);
                }
                l
            }
            Kind::Background => {
                let n = rng.random_range(3..=6);
                toks.extend(pick(&mut rng, &background, n).cloned());
                LabelSet::other()
            }
        };
        let sense_words = toks.clone();
        filler(&mut rng, &background, &mut toks);
        let id = new_id();
        let text = render(&mut rng, toks, &content);
        let a = author(&mut rng);
        truth.insert(id.clone(), labels);
        if test {
            eval_ids.push(id.clone());
        }
        let is_event = labels.has_event();
        tweets.push(Tweet {
            id: id.clone(),
            author_id: a.clone(),
            created_at,
            text: text.clone(),
            reply_to: None,
            is_retweet: false,
        });

        if rng.random_bool(config.reply_rate) {
            for _ in 0..rng.random_range(1..=3) {
                let mut r: Vec<String> = pick(&mut rng, &sense_words, 2).cloned().collect();
                if is_event {
                    for cat in labels.events_only().iter() {
                        r.extend(pick(&mut rng, &vocab[&cat].extended, 1).cloned());
                    }
                }
                filler(&mut rng, &background, &mut r);
                let rtext = render(&mut rng, r, &content);
                let rid = new_id();
                tweets.push(Tweet {
                    id: rid,
                    author_id: author(&mut rng),
                    created_at: created_at + rng.random_range(30..3600),
                    text: rtext,
                    reply_to: Some(id.clone()),
                    is_retweet: false,
                });
            }
        }
        if rng.random_bool(config.retweet_rate) {
            tweets.push(Tweet {
                id: new_id(),
                author_id: author(&mut rng),
                created_at: created_at + rng.random_range(10..1800),
                text: format!("RT @{a}: {text}"),
                reply_to: None,
                is_retweet: true,
            });
        }
    }
    tweets.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    eval_ids.sort();

    let mut emb_rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "synth/embeddings"));
    let mut embeddings = EmbeddingTable::new(config.embedding_dim);
    let mut all_words: BTreeSet<String> = words.used.clone();
    for cat in EventCategory::EVENTS {
        for lemma in &vocab[&cat].keywords {
            if let Some(forms) = lexicon.surface_forms(cat, lemma) {
                all_words.extend(forms.iter().cloned());
            }
        }
    }
    all_words.extend(STOPWORDS.iter().map(|s| s.to_string()));
    let dim = config.embedding_dim;
    let uniform = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> {
        (0..dim).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect()
    };
    let mut centroid_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut senses: Vec<Vec<&String>> = Vec::new();
    for v in vocab.values() {
        senses.push(v.core.iter().chain(&v.extended).collect());
        senses.extend(v.off_sense.iter().map(|o| o.iter().collect()));
    }
    for (k, ws) in senses.iter().enumerate() {
        for w in ws {
            centroid_of.insert(w.as_str(), k);
        }
    }
    let centroids: Vec<Vec<f64>> = (0..senses.len()).map(|_| uniform(&mut emb_rng, 1.0)).collect();
    for w in &all_words {
        let v: Vec<f64> = if STOPWORDS.contains(&w.as_str()) {
            uniform(&mut emb_rng, config.stopword_scale)
        } else if let Some(&k) = centroid_of.get(w.as_str()) {
            let noise = uniform(&mut emb_rng, config.sense_noise);
            centroids[k].iter().zip(noise).map(|(c, n)| c + n).collect()
        } else {
            uniform(&mut emb_rng, 1.0)
        };
        embeddings.insert(w.clone(), &v).expect("dimension matches");
    }

    SynthCorpus {
        tweets,
        truth,
        eval_ids,
        test_start,
        embeddings,
        vocab,
    }
}

/// Pipeline settings sized for [`generate`]'s default corpus, with paths
/// matching [`SynthCorpus::write_to`] relative to the output directory.
pub fn desk_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(seed);
    cfg.paths = Paths {
        corpus: "corpus.jsonl".into(),
        embeddings: "embeddings.txt".into(),
        lexicon: None,
        workdir: "work".into(),
        gold: Some("gold.jsonl".into()),
        truth: Some("truth.jsonl".into()),
    };
    cfg.encoder.selection_hidden = 8;
    cfg.classifier.hidden = 8;
    cfg.classifier.learning_rate = 1e-2;
    cfg.classifier.epochs = 10;
    cfg
}

#[derive(Serialize)]
struct LabelRecord<'a> {
    tweet_id: &'a str,
    labels: LabelSet,
}

/// One `{"tweet_id", "labels"}` record per line.
pub fn write_labels<'a, W, I>(mut out: W, items: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, LabelSet)>,
{
    for (tweet_id, labels) in items {
        serde_json::to_writer(&mut out, &LabelRecord { tweet_id, labels })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

impl SynthCorpus {
    /// Writes `corpus.jsonl`, `embeddings.txt`, `truth.jsonl` and
    /// `gold.jsonl` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut corpus = std::io::BufWriter::new(std::fs::File::create(dir.join("corpus.jsonl"))?);
        for t in &self.tweets {
            serde_json::to_writer(&mut corpus, t)?;
            corpus.write_all(b"\n")?;
        }
        corpus.flush()?;
        self.embeddings
            .write_text(std::io::BufWriter::new(std::fs::File::create(dir.join("embeddings.txt"))?))?;
        write_labels(
            std::io::BufWriter::new(std::fs::File::create(dir.join("truth.jsonl"))?),
            self.truth.iter().map(|(k, v)| (k.as_str(), *v)),
        )?;
        write_labels(
            std::io::BufWriter::new(std::fs::File::create(dir.join("gold.jsonl"))?),
            self.eval_ids.iter().map(|k| (k.as_str(), self.truth[k])),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn small() -> SynthConfig {
        SynthConfig {
            train_keyword: 20,
            train_plain: 10,
            train_background: 100,
            test_keyword: 10,
            test_plain: 5,
            test_background: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_and_planted() {
        let lex = KeywordLexicon::default();
        let a = generate(&small(), &lex);
        let b = generate(&small(), &lex);
        assert_eq!(a.tweets, b.tweets);
        assert_eq!(a.truth, b.truth);
        let originals = a.tweets.iter().filter(|t| t.is_original()).count();
        assert_eq!(originals, a.truth.len());
        assert_eq!(a.eval_ids.len(), 9 * 15 + 20);
        // off-sense keyword messages are gold Other but still match the keyword
        let off = a
            .tweets
            .iter()
            .filter(|t| t.is_original() && a.truth[&t.id] == LabelSet::other())
            .filter(|t| lex.keyword_baseline_predict(&tokenize(&t.text)).has_event())
            .count();
        assert_eq!(off, 9 * (6 + 3));
        assert!(a.tweets.iter().all(|t| tokenize(&t.text).iter().all(|w| a.embeddings.contains(w) || w == "rt" || w.starts_with("user"))));
    }
}
