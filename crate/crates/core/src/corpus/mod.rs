//! Message corpus: ingestion, author timelines, reply threads, snapshots.

mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub use tokenize::{tokenize, tokenize_with_spans, TokenizedTweet};

const SNAPSHOT_FORMAT: &str = "tweetsense-corpus";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub author_id: String,
    /// UTC epoch seconds.
    pub created_at: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<String>,
    #[serde(default)]
    pub is_retweet: bool,
}

impl Tweet {
    /// Original posts are the only classification targets; retweets and
    /// replies are kept as context and reply evidence.
    pub fn is_original(&self) -> bool {
        !self.is_retweet && self.reply_to.is_none()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTimestamp {
    Epoch(i64),
    Text(String),
}

fn parse_timestamp<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<i64, D::Error> {
    match RawTimestamp::deserialize(d)? {
        RawTimestamp::Epoch(s) => Ok(s),
        RawTimestamp::Text(s) => {
            if let Ok(secs) = s.trim().parse::<i64>() {
                return Ok(secs);
            }
            chrono::DateTime::parse_from_rfc3339(s.trim())
                .map(|t| t.timestamp())
                .map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    author_id: String,
    #[serde(deserialize_with = "parse_timestamp")]
    created_at: i64,
    text: String,
    #[serde(default)]
    reply_to: Option<String>,
    #[serde(default)]
    is_retweet: Option<bool>,
}

/// Counters collected while ingesting a record stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub dangling_replies: usize,
}

/// Immutable, fully indexed set of messages.
#[derive(Debug, Clone)]
pub struct Corpus {
    tweets: Vec<Tweet>,
    by_id: HashMap<String, usize>,
    timelines: BTreeMap<String, Vec<usize>>,
    timeline_pos: Vec<usize>,
    replies: Vec<Vec<usize>>,
}

impl Corpus {
    /// Reads one JSON record per line. Malformed lines are skipped and
    /// counted; duplicate ids keep the first occurrence.
    pub fn ingest<R: BufRead>(reader: R) -> Result<(Corpus, IngestReport)> {
        let mut report = IngestReport::default();
        let mut tweets = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    log::debug!("skipping malformed record: {e}");
                    report.malformed += 1;
                    continue;
                }
            };
            if raw.id.is_empty() || raw.reply_to.as_deref() == Some(raw.id.as_str()) {
                report.malformed += 1;
                continue;
            }
            if seen.contains_key(&raw.id) {
                report.duplicates += 1;
                continue;
            }
            seen.insert(raw.id.clone(), tweets.len());
            tweets.push(Tweet {
                id: raw.id,
                author_id: raw.author_id,
                created_at: raw.created_at,
                text: raw.text,
                reply_to: raw.reply_to.filter(|r| !r.is_empty()),
                is_retweet: raw.is_retweet.unwrap_or(false),
            });
        }
        if report.duplicates > 0 {
            log::warn!("{} duplicate tweet ids collapsed to first occurrence", report.duplicates);
        }
        if report.malformed > 0 {
            log::warn!("{} malformed records skipped", report.malformed);
        }
        let (corpus, dangling) = Corpus::finalize(tweets)?;
        report.dangling_replies = dangling;
        report.accepted = corpus.len();
        Ok((corpus, report))
    }

    /// Builds all indices. Reply references to ids absent from the corpus are
    /// dropped; returns the corpus and the number of dropped references.
    pub fn from_tweets(tweets: Vec<Tweet>) -> Result<Corpus> {
        let mut seen = std::collections::HashSet::new();
        let tweets: Vec<Tweet> = tweets.into_iter().filter(|t| seen.insert(t.id.clone())).collect();
        Ok(Corpus::finalize(tweets)?.0)
    }

    fn finalize(mut tweets: Vec<Tweet>) -> Result<(Corpus, usize)> {
        if tweets.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let by_id: HashMap<String, usize> =
            tweets.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect();

        let mut dangling = 0;
        let mut replies = vec![Vec::new(); tweets.len()];
        for (i, t) in tweets.iter_mut().enumerate() {
            if let Some(parent) = &t.reply_to {
                match by_id.get(parent) {
                    Some(&p) => replies[p].push(i),
                    None => {
                        dangling += 1;
                        t.reply_to = None;
                    }
                }
            }
        }
        let key = |i: &usize| (tweets[*i].created_at, tweets[*i].id.clone());
        for r in &mut replies {
            r.sort_by_key(key);
        }

        let mut timelines: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in tweets.iter().enumerate() {
            timelines.entry(t.author_id.clone()).or_default().push(i);
        }
        let mut timeline_pos = vec![0; tweets.len()];
        for line in timelines.values_mut() {
            line.sort_by_key(key);
            for (pos, &i) in line.iter().enumerate() {
                timeline_pos[i] = pos;
            }
        }
        Ok((
            Corpus {
                tweets,
                by_id,
                timelines,
                timeline_pos,
                replies,
            },
            dangling,
        ))
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn tweet(&self, index: usize) -> &Tweet {
        &self.tweets[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Tweet> {
        self.index_of(id).map(|i| &self.tweets[i])
    }

    /// Indices of the author's tweets ordered by `(created_at, id)`.
    pub fn timeline(&self, author_id: &str) -> &[usize] {
        self.timelines.get(author_id).map_or(&[], Vec::as_slice)
    }

    pub fn authors(&self) -> impl Iterator<Item = &str> {
        self.timelines.keys().map(String::as_str)
    }

    /// Direct replies to the tweet, ordered by `(created_at, id)`.
    pub fn replies(&self, index: usize) -> &[usize] {
        &self.replies[index]
    }

    /// Up to `n` tweets by the same author posted strictly before the
    /// target, nearest first, each with its distance in whole minutes
    /// (floored).
    pub fn preceding_tweets(&self, index: usize, n: usize) -> Vec<(usize, u64)> {
        let target = &self.tweets[index];
        let line = self.timeline(&target.author_id);
        let pos = self.timeline_pos[index];
        line[..pos]
            .iter()
            .rev()
            .filter(|&&i| self.tweets[i].created_at < target.created_at)
            .take(n)
            .map(|&i| {
                let secs = (target.created_at - self.tweets[i].created_at) as u64;
                (i, secs / 60)
            })
            .collect()
    }

    /// Indices of original (non-retweet, non-reply) tweets in storage order.
    pub fn originals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tweets.len()).filter(|&i| self.tweets[i].is_original())
    }

    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "count": self.tweets.len(),
        });
        writeln!(out, "{header}")?;
        for t in &self.tweets {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Corpus> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::EmptyCorpus)??;
        let header: serde_json::Value = serde_json::from_str(&header)?;
        if header["format"] != SNAPSHOT_FORMAT || header["version"] != SNAPSHOT_VERSION {
            return Err(Error::format("corpus snapshot", 1, "unsupported snapshot header"));
        }
        let mut tweets = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let t: Tweet = serde_json::from_str(&line)
                .map_err(|e| Error::format("corpus snapshot", n + 2, e.to_string()))?;
            tweets.push(t);
        }
        Ok(Corpus::finalize(tweets)?.0)
    }
}

/// Token lists for every tweet of a corpus, computed once.
#[derive(Debug, Clone)]
pub struct TokenCache {
    tokens: Vec<Vec<String>>,
}

impl TokenCache {
    pub fn new(corpus: &Corpus) -> Self {
        TokenCache {
            tokens: corpus.tweets().iter().map(|t| tokenize(&t.text)).collect(),
        }
    }

    pub fn tokens(&self, index: usize) -> &[String] {
        &self.tokens[index]
    }
}
