//! The three phases as resumable stages over a work directory.
//!
//! Each stage reads the artifacts of earlier stages, writes its own and
//! records the SHA-256 of every input and output in `manifest.json` together
//! with the configuration hash. A lock file keeps a second pipeline
//! instance out of the same directory.

mod artifact;
mod config;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_run, seed_negatives, training_set, BootstrapConfig, RoundRecord};
use crate::classifier::{bundle, train, ChannelBundle, ModelCheckpoint, Prediction, TrainReport};
use crate::corpus::{Corpus, IngestReport, TokenCache};
use crate::encoder::{EmbeddingTable, EncoderParams, EncoderRole, ImportanceProfile};
use crate::error::{Error, Result};
use crate::eval::{evaluate, trend_counts, EvalReport, SlpaBaseline};
use crate::graph_cluster::{build_graph, rank_clusters, slpa_cluster, Cluster, PoolMember, TweetGraph};
use crate::ontology::{EventCategory, KeywordLexicon, LabelSet, DEFAULT_LEXICON, NUM_CLASSES};
use crate::seed;
use crate::wsd::{AnnotationService, CleaningReport, LabeledExample, OracleAnnotator, WsdSession};

pub use artifact::{read_label_file, Artifact, ARTIFACT_VERSION};
pub use config::{BootstrapSettings, ClassifierSettings, ClusteringSettings, EncoderSettings, Paths, PipelineConfig, PoolScope};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

pub const CORPUS: Artifact = Artifact::new("corpus.snapshot.jsonl", "corpus", "ingest");
pub const INGEST_REPORT: Artifact = Artifact::new("ingest_report.json", "ingest report", "ingest");
pub const PROFILES: Artifact = Artifact::new("profiles.jsonl", "profiles", "select-words");
pub const POOLS: Artifact = Artifact::new("pools.json", "pools", "select-words");
pub const GRAPHS: Artifact = Artifact::new("graphs.json", "graphs", "build-graph");
pub const CLUSTERS: Artifact = Artifact::new("clusters.json", "clusters", "cluster");
pub const DECISIONS: Artifact = Artifact::new("decisions.jsonl", "decisions", "annotate-serve");
pub const LABELED: Artifact = Artifact::new("labeled.jsonl", "labeled", "assemble-labels");
pub const CLEANING: Artifact = Artifact::new("cleaning_report.json", "cleaning report", "assemble-labels");
pub const MODEL_SEED: Artifact = Artifact::new("model_seed.json", "seed model", "train");
pub const TRAIN_REPORT: Artifact = Artifact::new("train_report.json", "train report", "train");
pub const MODEL: Artifact = Artifact::new("model.json", "model", "bootstrap");
pub const ROUNDS: Artifact = Artifact::new("bootstrap_rounds.jsonl", "bootstrap rounds", "bootstrap");
pub const TREND: Artifact = Artifact::new("trend.csv", "trend", "trend");

/// Which model or baseline produced a prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// The classifier trained on the cleaned seed set.
    Seed,
    /// The bootstrapped classifier.
    Final,
    Keyword,
    Slpa,
}

impl Predictor {
    pub fn predictions(self) -> Artifact {
        match self {
            Predictor::Seed => Artifact::new("predictions_seed.jsonl", "seed predictions", "predict"),
            Predictor::Final => Artifact::new("predictions.jsonl", "predictions", "predict"),
            Predictor::Keyword => Artifact::new("predictions_keyword.jsonl", "keyword predictions", "baseline"),
            Predictor::Slpa => Artifact::new("predictions_slpa.jsonl", "slpa predictions", "baseline"),
        }
    }

    pub fn report(self) -> Artifact {
        match self {
            Predictor::Seed => Artifact::new("eval_seed.json", "seed evaluation", "evaluate"),
            Predictor::Final => Artifact::new("eval_report.json", "evaluation", "evaluate"),
            Predictor::Keyword => Artifact::new("eval_keyword.json", "keyword evaluation", "baseline"),
            Predictor::Slpa => Artifact::new("eval_slpa.json", "slpa evaluation", "baseline"),
        }
    }

    fn stage(self) -> String {
        match self {
            Predictor::Seed | Predictor::Final => format!("{:?}", self).to_lowercase(),
            Predictor::Keyword => "keyword".into(),
            Predictor::Slpa => "slpa".into(),
        }
    }
}

/// Artifact name and SHA-256 of a stage input.
type StageInput = (String, String);

/// Keyword messages of one category, overall and per matched keyword.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordPool {
    pub tweets: Vec<String>,
    pub by_keyword: BTreeMap<String, Vec<String>>,
}

/// The graph of one clustering unit: a whole category pool, or the messages
/// of a single keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolGraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword: Option<String>,
    pub graph: TweetGraph,
}

/// Word-selection output for one original message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub tweet_id: String,
    pub token_count: usize,
    pub scores: Vec<f64>,
    pub selected: BTreeSet<String>,
    /// Part of the evaluation set.
    pub held_out: bool,
}

impl ProfileRecord {
    pub fn member(&self) -> PoolMember {
        PoolMember {
            tweet_id: self.tweet_id.clone(),
            token_count: self.token_count,
            selected: self.selected.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

/// Removes the lock file when dropped.
#[derive(Debug)]
struct WorkdirLock {
    path: PathBuf,
}

impl WorkdirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkdirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ingest: IngestReport,
    pub decisions: usize,
    pub cleaning: CleaningReport,
    pub rounds: usize,
    pub reports: BTreeMap<String, EvalReport>,
}

/// Loaded corpus with its token cache.
struct Texts {
    corpus: Corpus,
    tokens: TokenCache,
}

#[derive(Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    workdir: PathBuf,
    _lock: WorkdirLock,
}

impl Pipeline {
    /// Validates the configuration, creates the work directory and locks it.
    pub fn open(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let workdir = config.paths.workdir.clone();
        std::fs::create_dir_all(&workdir)?;
        let lock = WorkdirLock::acquire(&workdir)?;
        Ok(Pipeline {
            config,
            workdir,
            _lock: lock,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    pub fn path(&self, a: &Artifact) -> PathBuf {
        self.workdir.join(a.file)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let path = self.workdir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest {
                format: "tweetsense-manifest".into(),
                version: ARTIFACT_VERSION,
                ..Manifest::default()
            });
        }
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    fn record(&self, stage: &str, inputs: Vec<(String, String)>, outputs: &[&Artifact]) -> Result<()> {
        let mut m = self.manifest()?;
        let hash = self.config.hash();
        m.config_hash = hash.clone();
        let mut rec = StageRecord {
            config_hash: hash,
            inputs: inputs.into_iter().collect(),
            outputs: BTreeMap::new(),
        };
        for a in outputs {
            rec.outputs.insert(a.file.to_string(), artifact::file_sha(&self.path(a))?);
        }
        m.stages.insert(stage.to_string(), rec);
        let mut f = File::create(self.workdir.join(MANIFEST_FILE))?;
        serde_json::to_writer_pretty(&mut f, &m)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    fn input(&self, a: &Artifact) -> Result<(String, String)> {
        let p = self.path(a);
        if !p.exists() {
            return Err(a.missing());
        }
        Ok((a.file.to_string(), artifact::file_sha(&p)?))
    }

    fn external(name: &str, path: &Path) -> Result<(String, String)> {
        let sha = artifact::file_sha(path).map_err(|e| Error::Config(format!("cannot read {name} {}: {e}", path.display())))?;
        Ok((name.to_string(), sha))
    }

    fn lexicon(&self) -> Result<(KeywordLexicon, (String, String))> {
        match &self.config.paths.lexicon {
            Some(p) => Ok((KeywordLexicon::load(p)?, Self::external("lexicon", p)?)),
            None => Ok((
                KeywordLexicon::default(),
                ("lexicon".into(), seed::sha256_hex(DEFAULT_LEXICON.as_bytes())),
            )),
        }
    }

    fn embeddings(&self) -> Result<(EmbeddingTable, (String, String))> {
        let p = &self.config.paths.embeddings;
        let f = File::open(p).map_err(|e| Error::Config(format!("cannot read embeddings {}: {e}", p.display())))?;
        let table = EmbeddingTable::read_text(BufReader::new(f), &p.display().to_string())?;
        if let Some(d) = self.config.encoder.embedding_dim {
            if d != table.dim() {
                return Err(Error::Config(format!("embeddings have dimension {}, config expects {d}", table.dim())));
            }
        }
        Ok((table, Self::external("embeddings", p)?))
    }

    fn gold(&self) -> Result<Option<(BTreeMap<String, LabelSet>, StageInput)>> {
        match &self.config.paths.gold {
            Some(p) => Ok(Some((read_label_file(p)?, Self::external("gold", p)?))),
            None => Ok(None),
        }
    }

    fn texts(&self) -> Result<Texts> {
        let corpus = Corpus::read_snapshot(artifact_reader(&self.workdir, &CORPUS)?)?;
        let tokens = TokenCache::new(&corpus);
        Ok(Texts { corpus, tokens })
    }

    /// Ingests the raw stream into a normalized snapshot.
    pub fn ingest(&self) -> Result<IngestReport> {
        let p = &self.config.paths.corpus;
        let f = File::open(p).map_err(|e| Error::Config(format!("cannot read corpus {}: {e}", p.display())))?;
        let (corpus, report) = Corpus::ingest(BufReader::new(f))?;
        log::info!(
            "ingested {} messages ({} malformed, {} duplicates, {} dangling replies)",
            report.accepted,
            report.malformed,
            report.duplicates,
            report.dangling_replies
        );
        corpus.write_snapshot(std::io::BufWriter::new(File::create(self.path(&CORPUS))?))?;
        artifact::write_json(&self.workdir, &INGEST_REPORT, &report)?;
        self.record("ingest", vec![Self::external("corpus", p)?], &[&CORPUS, &INGEST_REPORT])?;
        Ok(report)
    }

    /// Importance profiles of every original message and the per-category
    /// keyword pools of the training period.
    pub fn select_words(&self) -> Result<BTreeMap<EventCategory, KeywordPool>> {
        let t = self.texts()?;
        let (lexicon, lex_in) = self.lexicon()?;
        let (emb, emb_in) = self.embeddings()?;
        let gold = self.gold()?;
        let held: HashSet<&str> = gold.as_ref().map(|(g, _)| g.keys().map(String::as_str).collect()).unwrap_or_default();
        let encoder = EncoderParams::seeded(
            EncoderRole::Selection,
            emb.dim(),
            self.config.encoder.selection_hidden,
            seed::derive(self.config.seed, "encoder/selection"),
        );
        let originals: Vec<usize> = t.corpus.originals().filter(|&i| !t.tokens.tokens(i).is_empty()).collect();
        let profiles: Vec<ProfileRecord> = originals
            .par_iter()
            .map(|&i| {
                let tw = t.corpus.tweet(i);
                let toks = t.tokens.tokens(i);
                let p = ImportanceProfile::compute(&tw.id, &encoder, &emb, toks)?;
                Ok(ProfileRecord {
                    tweet_id: tw.id.clone(),
                    token_count: toks.len(),
                    scores: p.scores,
                    selected: p.selected,
                    held_out: held.contains(tw.id.as_str()),
                })
            })
            .collect::<Result<_>>()?;
        let mut pools: BTreeMap<EventCategory, KeywordPool> =
            EventCategory::EVENTS.iter().map(|&c| (c, KeywordPool::default())).collect();
        for (&i, p) in originals.iter().zip(&profiles) {
            if p.held_out {
                continue;
            }
            let hits: BTreeSet<(EventCategory, String)> = lexicon
                .match_keywords(t.tokens.tokens(i))
                .into_iter()
                .map(|h| (h.category, h.lemma))
                .collect();
            let mut last = None;
            for (c, lemma) in hits {
                let pool = pools.entry(c).or_default();
                if last != Some(c) {
                    pool.tweets.push(p.tweet_id.clone());
                    last = Some(c);
                }
                pool.by_keyword.entry(lemma).or_default().push(p.tweet_id.clone());
            }
        }
        for (c, pool) in &pools {
            log::info!("{c}: {} keyword messages over {} keywords", pool.tweets.len(), pool.by_keyword.len());
        }
        artifact::write_jsonl(&self.workdir, &PROFILES, &profiles)?;
        artifact::write_json(&self.workdir, &POOLS, &pools)?;
        let mut inputs = vec![self.input(&CORPUS)?, lex_in, emb_in];
        inputs.extend(gold.map(|(_, g)| g));
        self.record("select-words", inputs, &[&PROFILES, &POOLS])?;
        Ok(pools)
    }

    fn profiles(&self) -> Result<Vec<ProfileRecord>> {
        artifact::read_jsonl(&self.workdir, &PROFILES)
    }

    fn pools(&self) -> Result<BTreeMap<EventCategory, KeywordPool>> {
        artifact::read_json(&self.workdir, &POOLS)
    }

    fn profile_index(&self) -> Result<HashMap<String, ProfileRecord>> {
        Ok(self.profiles()?.into_iter().map(|p| (p.tweet_id.clone(), p)).collect())
    }

    fn members(profiles: &HashMap<String, ProfileRecord>, ids: &[String]) -> Result<Vec<PoolMember>> {
        ids.iter()
            .map(|id| profiles.get(id).map(ProfileRecord::member).ok_or_else(|| Error::UnknownTweet(id.clone())))
            .collect()
    }

    /// One graph per category, or per keyword of each category, as the
    /// clustering scope asks.
    pub fn build_graphs(&self) -> Result<BTreeMap<EventCategory, Vec<PoolGraph>>> {
        let profiles = self.profile_index()?;
        let mut graphs = BTreeMap::new();
        for (c, pool) in self.pools()? {
            let units: Vec<(Option<String>, &[String])> = match self.config.clustering.scope {
                PoolScope::Category => vec![(None, &pool.tweets[..])],
                PoolScope::Keyword => pool.by_keyword.iter().map(|(k, ids)| (Some(k.clone()), &ids[..])).collect(),
            };
            let mut out = Vec::with_capacity(units.len());
            for (keyword, ids) in units {
                let graph = build_graph(&Self::members(&profiles, ids)?);
                log::info!(
                    "{c}{}: {} nodes, {} edges",
                    keyword.as_ref().map(|k| format!("/{k}")).unwrap_or_default(),
                    graph.node_count(),
                    graph.edge_count()
                );
                out.push(PoolGraph { keyword, graph });
            }
            graphs.insert(c, out);
        }
        artifact::write_json(&self.workdir, &GRAPHS, &graphs)?;
        self.record("build-graph", vec![self.input(&PROFILES)?, self.input(&POOLS)?], &[&GRAPHS])?;
        Ok(graphs)
    }

    /// Ranked clusters per category. Ids are `CAT/c0000`, or `CAT/keyword/c0000`
    /// when each keyword is clustered on its own; the queue then ranks the
    /// union, dropping repeated member sets.
    pub fn cluster(&self) -> Result<BTreeMap<EventCategory, Vec<Cluster>>> {
        let graphs: BTreeMap<EventCategory, Vec<PoolGraph>> = artifact::read_json(&self.workdir, &GRAPHS)?;
        let profiles = self.profile_index()?;
        let mut out = BTreeMap::new();
        for (c, units) in &graphs {
            let mut clusters = Vec::new();
            for unit in units {
                let pool = Self::members(&profiles, &unit.graph.nodes)?;
                let (prefix, stage) = match &unit.keyword {
                    None => (format!("{c}"), format!("slpa/{c}")),
                    Some(k) => (format!("{c}/{k}"), format!("slpa/{c}/{k}")),
                };
                let found = slpa_cluster(&unit.graph, &pool, &self.config.slpa, seed::derive(self.config.seed, &stage));
                clusters.extend(found.into_iter().map(|mut cl| {
                    cl.id = format!("{prefix}/{}", cl.id);
                    cl
                }));
            }
            if units.len() > 1 {
                let mut seen = BTreeSet::new();
                clusters.retain(|cl| seen.insert(cl.members.clone()));
                clusters = rank_clusters(clusters);
            }
            log::info!("{c}: {} clusters", clusters.len());
            out.insert(*c, clusters);
        }
        artifact::write_json(&self.workdir, &CLUSTERS, &out)?;
        self.record("cluster", vec![self.input(&GRAPHS)?, self.input(&POOLS)?], &[&CLUSTERS])?;
        Ok(out)
    }

    /// The annotation service over the ranked clusters, with the journal in
    /// the work directory replayed.
    pub fn annotation_service(&self) -> Result<AnnotationService> {
        let queues: BTreeMap<EventCategory, Vec<Cluster>> = artifact::read_json(&self.workdir, &CLUSTERS)?;
        let t = self.texts()?;
        let (lexicon, _) = self.lexicon()?;
        let mut texts = HashMap::new();
        for cl in queues.values().flatten() {
            for m in &cl.members {
                let tw = t.corpus.get(m).ok_or_else(|| Error::UnknownTweet(m.clone()))?;
                texts.insert(m.clone(), tw.text.clone());
            }
        }
        let session = WsdSession::new(
            self.config.wsd.clone(),
            seed::derive(self.config.seed, "wsd"),
            lexicon,
            queues,
            texts,
        )?;
        let keyword_tweets = self.pools()?.into_iter().map(|(c, p)| (c, p.tweets.into_iter().collect())).collect();
        AnnotationService::open(session, &self.path(&DECISIONS), keyword_tweets)
    }

    /// Answers every queue from the truth file; returns the number of new
    /// decisions.
    pub fn annotate_oracle(&self, truth_path: Option<&Path>) -> Result<usize> {
        let path = truth_path
            .map(Path::to_path_buf)
            .or_else(|| self.config.paths.truth.clone())
            .ok_or_else(|| Error::Config("the oracle annotator needs a truth file (paths.truth)".into()))?;
        let truth: HashMap<String, LabelSet> = read_label_file(&path)?.into_iter().collect();
        let mut svc = self.annotation_service()?;
        let n = OracleAnnotator::new(truth).run_service(&mut svc)?;
        log::info!("oracle recorded {n} decisions");
        self.record_annotation(vec![Self::external("truth", &path)?])?;
        Ok(n)
    }

    /// Manifest entry for the journal.
    pub fn record_annotation(&self, mut inputs: Vec<(String, String)>) -> Result<()> {
        inputs.push(self.input(&CLUSTERS)?);
        if !self.path(&DECISIONS).exists() {
            File::create(self.path(&DECISIONS))?;
        }
        self.record("annotate-serve", inputs, &[&DECISIONS])
    }

    pub fn assemble_labels(&self) -> Result<(Vec<LabeledExample>, CleaningReport)> {
        if !self.path(&DECISIONS).exists() {
            return Err(DECISIONS.missing());
        }
        let svc = self.annotation_service()?;
        if !svc.session().all_done() {
            log::warn!("assembling labels before every category is done");
        }
        let (labeled, report) = svc.export();
        for w in &report.warnings {
            log::warn!("{w}");
        }
        artifact::write_jsonl(&self.workdir, &LABELED, &labeled)?;
        artifact::write_json(&self.workdir, &CLEANING, &report)?;
        self.record(
            "assemble-labels",
            vec![self.input(&DECISIONS)?, self.input(&CLUSTERS)?, self.input(&POOLS)?],
            &[&LABELED, &CLEANING],
        )?;
        Ok((labeled, report))
    }

    fn labeled(&self) -> Result<Vec<LabeledExample>> {
        artifact::read_jsonl(&self.workdir, &LABELED)
    }

    /// Bundles of the training-period originals and the unlabeled pool.
    fn training_inputs(&self, t: &Texts, labeled: &[LabeledExample]) -> Result<(HashMap<String, ChannelBundle>, Vec<String>)> {
        let held: HashSet<String> = self.gold()?.map(|(g, _)| g.into_keys().collect()).unwrap_or_default();
        let labeled_ids: HashSet<&str> = labeled.iter().map(|e| e.tweet_id.as_str()).collect();
        let train: Vec<usize> = t
            .corpus
            .originals()
            .filter(|&i| !t.tokens.tokens(i).is_empty() && !held.contains(&t.corpus.tweet(i).id))
            .collect();
        let bundles: HashMap<String, ChannelBundle> = train
            .par_iter()
            .map(|&i| (t.corpus.tweet(i).id.clone(), bundle(&t.corpus, &t.tokens, i)))
            .collect();
        for e in labeled {
            if !bundles.contains_key(&e.tweet_id) {
                return Err(Error::UnknownTweet(e.tweet_id.clone()));
            }
        }
        let pool = train
            .iter()
            .map(|&i| t.corpus.tweet(i).id.clone())
            .filter(|id| !labeled_ids.contains(id.as_str()))
            .collect();
        Ok((bundles, pool))
    }

    /// Trains the classifier on the cleaned labels plus sampled negatives.
    pub fn train(&self) -> Result<(ModelCheckpoint, TrainReport)> {
        let labeled = self.labeled()?;
        let (emb, emb_in) = self.embeddings()?;
        let t = self.texts()?;
        let (bundles, pool) = self.training_inputs(&t, &labeled)?;
        let set = training_set(&labeled, &pool, &bundles, seed_negatives(seed::derive(self.config.seed, "bootstrap")))?;
        let (model, report) = train(&set, &emb, &self.config.train_config(), None)?;
        artifact::write_json(&self.workdir, &MODEL_SEED, &model)?;
        artifact::write_json(&self.workdir, &TRAIN_REPORT, &report)?;
        self.record("train", vec![self.input(&LABELED)?, self.input(&CORPUS)?, emb_in], &[&MODEL_SEED, &TRAIN_REPORT])?;
        Ok((model, report))
    }

    pub fn bootstrap(&self) -> Result<Vec<RoundRecord>> {
        let labeled = self.labeled()?;
        let seed_model: ModelCheckpoint = artifact::read_json(&self.workdir, &MODEL_SEED)?;
        let (emb, emb_in) = self.embeddings()?;
        let (lexicon, lex_in) = self.lexicon()?;
        let t = self.texts()?;
        let (bundles, pool) = self.training_inputs(&t, &labeled)?;
        let cfg = BootstrapConfig {
            schedule: self.config.schedule(),
            train: self.config.train_config(),
            dropout_rate: self.config.bootstrap.dropout_rate,
            lexicon: &lexicon,
            seed: seed::derive(self.config.seed, "bootstrap"),
        };
        let outcome = bootstrap_run(&labeled, &pool, &bundles, &emb, &cfg, Some(seed_model))?;
        artifact::write_json(&self.workdir, &MODEL, &outcome.model)?;
        artifact::write_jsonl(&self.workdir, &ROUNDS, &outcome.state.history)?;
        self.record(
            "bootstrap",
            vec![self.input(&LABELED)?, self.input(&MODEL_SEED)?, self.input(&CORPUS)?, emb_in, lex_in],
            &[&MODEL, &ROUNDS],
        )?;
        Ok(outcome.state.history)
    }

    /// Evaluation ids when a gold file is configured, otherwise every
    /// original message.
    fn targets(&self, t: &Texts) -> Result<Vec<usize>> {
        match self.gold()? {
            Some((g, _)) => g
                .keys()
                .map(|id| t.corpus.index_of(id).ok_or_else(|| Error::UnknownTweet(id.clone())))
                .collect(),
            None => Ok(t.corpus.originals().collect()),
        }
    }

    fn write_predictions(&self, p: Predictor, preds: &[Prediction], mut inputs: Vec<(String, String)>) -> Result<()> {
        let a = p.predictions();
        artifact::write_jsonl(&self.workdir, &a, preds)?;
        if let Some((gold, g_in)) = self.gold()? {
            let report = evaluate(&label_map(preds), &gold)?;
            artifact::write_json(&self.workdir, &p.report(), &report)?;
            if matches!(p, Predictor::Keyword | Predictor::Slpa) {
                inputs.push(g_in.clone());
                self.record(&format!("baseline-{}", p.stage()), inputs, &[&a, &p.report()])?;
                return Ok(());
            }
            inputs.push(g_in);
        }
        self.record(&format!("{}-{}", a.stage, p.stage()), inputs, &[&a])
    }

    /// Applies the seed or bootstrapped classifier to the targets. Messages
    /// without tokens get zero scores and `{Other}`.
    pub fn predict(&self, which: Predictor) -> Result<Vec<Prediction>> {
        let model_artifact = match which {
            Predictor::Seed => MODEL_SEED,
            Predictor::Final => MODEL,
            _ => return Err(Error::Config("predict takes the seed or final model".into())),
        };
        let model: ModelCheckpoint = artifact::read_json(&self.workdir, &model_artifact)?;
        model.validate()?;
        let (emb, emb_in) = self.embeddings()?;
        let t = self.texts()?;
        let targets = self.targets(&t)?;
        let preds: Vec<Prediction> = targets
            .par_iter()
            .map(|&i| {
                let b = bundle(&t.corpus, &t.tokens, i);
                if b.target.is_empty() {
                    Ok(Prediction::from_scores(b.tweet_id, vec![0.0; NUM_CLASSES], model.config.threshold))
                } else {
                    model.predict_one(&emb, &b)
                }
            })
            .collect::<Result<_>>()?;
        self.write_predictions(which, &preds, vec![self.input(&model_artifact)?, self.input(&CORPUS)?, emb_in])?;
        Ok(preds)
    }

    fn read_predictions(&self, which: Predictor) -> Result<Vec<Prediction>> {
        artifact::read_jsonl(&self.workdir, &which.predictions())
    }

    pub fn evaluate(&self, which: Predictor) -> Result<EvalReport> {
        let preds = self.read_predictions(which)?;
        let (gold, g_in) = self
            .gold()?
            .ok_or_else(|| Error::Config("evaluation needs a gold file (paths.gold)".into()))?;
        let report = evaluate(&label_map(&preds), &gold)?;
        let a = which.report();
        artifact::write_json(&self.workdir, &a, &report)?;
        std::fs::write(self.workdir.join(a.file.replace(".json", ".txt")), report.to_table())?;
        self.record(&format!("evaluate-{}", which.stage()), vec![self.input(&which.predictions())?, g_in], &[&a])?;
        Ok(report)
    }

    pub fn baseline_keyword(&self) -> Result<Vec<Prediction>> {
        let (lexicon, lex_in) = self.lexicon()?;
        let t = self.texts()?;
        let preds: Vec<Prediction> = self
            .targets(&t)?
            .into_iter()
            .map(|i| {
                let labels = lexicon.keyword_baseline_predict(t.tokens.tokens(i));
                let scores = EventCategory::ALL.iter().map(|&c| if labels.contains(c) { 1.0 } else { 0.0 }).collect();
                Prediction {
                    tweet_id: t.corpus.tweet(i).id.clone(),
                    scores,
                    labels,
                }
            })
            .collect();
        self.write_predictions(Predictor::Keyword, &preds, vec![self.input(&CORPUS)?, lex_in])?;
        Ok(preds)
    }

    /// Clusters all training-period originals once and labels each target by
    /// its labelled neighbours.
    pub fn baseline_slpa(&self) -> Result<Vec<Prediction>> {
        let (lexicon, lex_in) = self.lexicon()?;
        let profiles = self.profiles()?;
        let pool: Vec<PoolMember> = profiles.iter().filter(|p| !p.held_out).map(ProfileRecord::member).collect();
        let graph = build_graph(&pool);
        let clusters = slpa_cluster(&graph, &pool, &self.config.slpa, seed::derive(self.config.seed, "baseline/slpa"));
        let baseline = SlpaBaseline::from_clusters(&pool, &clusters, &lexicon);
        let by_id: HashMap<&str, &ProfileRecord> = profiles.iter().map(|p| (p.tweet_id.as_str(), p)).collect();
        let t = self.texts()?;
        let preds: Vec<Prediction> = self
            .targets(&t)?
            .into_iter()
            .map(|i| {
                let id = &t.corpus.tweet(i).id;
                let labels = by_id.get(id.as_str()).map_or(LabelSet::other(), |p| baseline.predict(&p.member()));
                let scores = EventCategory::ALL.iter().map(|&c| if labels.contains(c) { 1.0 } else { 0.0 }).collect();
                Prediction {
                    tweet_id: id.clone(),
                    scores,
                    labels,
                }
            })
            .collect();
        self.write_predictions(Predictor::Slpa, &preds, vec![self.input(&PROFILES)?, self.input(&CORPUS)?, lex_in])?;
        Ok(preds)
    }

    /// Hourly per-category counts of the bootstrapped predictions.
    pub fn trend(&self) -> Result<String> {
        let preds = self.read_predictions(Predictor::Final)?;
        let t = self.texts()?;
        let items = preds
            .iter()
            .map(|p| {
                let i = t.corpus.index_of(&p.tweet_id).ok_or_else(|| Error::UnknownTweet(p.tweet_id.clone()))?;
                Ok((t.corpus.tweet(i).created_at, p.labels))
            })
            .collect::<Result<Vec<_>>>()?;
        let csv = trend_counts(items).to_csv();
        std::fs::write(self.path(&TREND), &csv)?;
        self.record("trend", vec![self.input(&Predictor::Final.predictions())?, self.input(&CORPUS)?], &[&TREND])?;
        Ok(csv)
    }

    /// Every stage in order with the oracle annotator standing in for the
    /// human.
    pub fn run_all(&self) -> Result<RunSummary> {
        let ingest = self.ingest()?;
        self.select_words()?;
        self.build_graphs()?;
        self.cluster()?;
        let decisions = self.annotate_oracle(None)?;
        let (_, cleaning) = self.assemble_labels()?;
        self.train()?;
        let rounds = self.bootstrap()?.len();
        self.predict(Predictor::Seed)?;
        self.predict(Predictor::Final)?;
        self.baseline_keyword()?;
        let mut reports = BTreeMap::new();
        if self.config.paths.gold.is_some() {
            for p in [Predictor::Seed, Predictor::Final] {
                reports.insert(p.stage(), self.evaluate(p)?);
            }
            reports.insert(
                Predictor::Keyword.stage(),
                artifact::read_json(&self.workdir, &Predictor::Keyword.report())?,
            );
        }
        self.trend()?;
        Ok(RunSummary {
            ingest,
            decisions,
            cleaning,
            rounds,
            reports,
        })
    }
}

fn artifact_reader(dir: &Path, a: &Artifact) -> Result<BufReader<File>> {
    match File::open(dir.join(a.file)) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(a.missing()),
        Err(e) => Err(e.into()),
    }
}

pub fn label_map(preds: &[Prediction]) -> BTreeMap<String, LabelSet> {
    preds.iter().map(|p| (p.tweet_id.clone(), p.labels)).collect()
}
