use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bootstrap::ScheduleConfig;
use crate::classifier::{Channels, TrainConfig, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::graph_cluster::SlpaConfig;
use crate::seed;
use crate::wsd::WsdConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw message stream, one JSON object per line.
    pub corpus: PathBuf,
    /// Word vectors in text format.
    pub embeddings: PathBuf,
    /// Keyword lexicon; the built-in one when absent.
    pub lexicon: Option<PathBuf>,
    pub workdir: PathBuf,
    /// Gold labels of the evaluation messages, which are held out of training.
    pub gold: Option<PathBuf>,
    /// Labels the oracle annotator answers from.
    pub truth: Option<PathBuf>,
}

impl Paths {
    /// Joins every relative path onto `base`.
    pub fn relative_to(&self, base: &Path) -> Paths {
        let j = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Paths {
            corpus: j(&self.corpus),
            embeddings: j(&self.embeddings),
            lexicon: self.lexicon.as_ref().map(j),
            workdir: j(&self.workdir),
            gold: self.gold.as_ref().map(j),
            truth: self.truth.as_ref().map(j),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "corpus.jsonl".into(),
            embeddings: "embeddings.txt".into(),
            lexicon: None,
            workdir: "work".into(),
            gold: None,
            truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    /// Expected word-vector dimension; checked against the embeddings file.
    pub embedding_dim: Option<usize>,
    /// Hidden units per direction of the word-selection encoder.
    pub selection_hidden: usize,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        EncoderSettings {
            embedding_dim: None,
            selection_hidden: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub threshold: f64,
    pub context_channel: bool,
    pub reply_channel: bool,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        ClassifierSettings {
            hidden: t.hidden,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            threshold: DEFAULT_THRESHOLD,
            context_channel: true,
            reply_channel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub start: f64,
    pub step: f64,
    pub floor: f64,
    pub min_selected: usize,
    pub dropout_rate: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        let s = ScheduleConfig::default();
        BootstrapSettings {
            start: s.start,
            step: s.step,
            floor: s.floor,
            min_selected: s.min_selected,
            dropout_rate: 0.2,
        }
    }
}

/// What one clustering run covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolScope {
    /// All keyword messages of a category together.
    #[default]
    Category,
    /// One run per keyword; the category queue ranks the union.
    Keyword,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSettings {
    pub scope: PoolScope,
}

/// Every tunable of a pipeline run. Only `seed` is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub encoder: EncoderSettings,
    #[serde(default)]
    pub clustering: ClusteringSettings,
    #[serde(default)]
    pub slpa: SlpaConfig,
    #[serde(default)]
    pub wsd: WsdConfig,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    #[serde(default)]
    pub bootstrap: BootstrapSettings,
}

impl PipelineConfig {
    pub fn new(seed: u64) -> Self {
        PipelineConfig {
            seed,
            paths: Paths::default(),
            encoder: EncoderSettings::default(),
            clustering: ClusteringSettings::default(),
            slpa: SlpaConfig::default(),
            wsd: WsdConfig::default(),
            classifier: ClassifierSettings::default(),
            bootstrap: BootstrapSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file; relative paths in it are taken from the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.paths = cfg.paths.relative_to(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if i64::try_from(self.seed).is_err() {
            return Err(Error::Config("seed must be below 2^63".into()));
        }
        self.slpa.validate().map_err(Error::Config)?;
        if self.encoder.selection_hidden == 0 {
            return Err(Error::Config("encoder.selection_hidden must be positive".into()));
        }
        if self.encoder.embedding_dim == Some(0) {
            return Err(Error::Config("encoder.embedding_dim must be positive".into()));
        }
        if self.wsd.samples == 0 || self.wsd.target_pertinent == 0 {
            return Err(Error::Config("wsd.samples and wsd.target_pertinent must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.bootstrap.dropout_rate) {
            return Err(Error::Config("bootstrap.dropout_rate must be in [0, 1]".into()));
        }
        self.schedule().validate()?;
        self.train_config().validate()
    }

    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            start: self.bootstrap.start,
            step: self.bootstrap.step,
            floor: self.bootstrap.floor,
            min_selected: self.bootstrap.min_selected,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let c = &self.classifier;
        TrainConfig {
            hidden: c.hidden,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            threshold: c.threshold,
            channels: Channels {
                context: c.context_channel,
                reply: c.reply_channel,
            },
            seed: seed::derive(self.seed, "classifier"),
            ..TrainConfig::default()
        }
    }

    /// SHA-256 over every setting except `paths`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("paths");
        }
        seed::sha256_hex(v.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(PipelineConfig::from_toml("[slpa]\niterations = 5\n"), Err(Error::Config(_))));
        let c = PipelineConfig::from_toml("seed = 3\n").unwrap();
        assert_eq!(c, PipelineConfig::new(3));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(PipelineConfig::from_toml("seed = 1\n[bootstrap]\ndropout_rate = 1.5\n").is_err());
        assert!(PipelineConfig::from_toml("seed = 1\n[slpa]\nthreshold = 0.9\n").is_err());
        assert!(PipelineConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
        assert!(PipelineConfig::from_toml("seed = 1\n[clustering]\nscope = \"tweet\"\n").is_err());
        let c = PipelineConfig::from_toml("seed = 1\n[clustering]\nscope = \"keyword\"\n").unwrap();
        assert_eq!(c.clustering.scope, PoolScope::Keyword);
    }

    #[test]
    fn toml_roundtrip_and_hash_ignores_paths() {
        let mut c = PipelineConfig::new(9);
        c.paths.gold = Some("g.jsonl".into());
        let back = PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        let mut d = c.clone();
        d.paths.workdir = "elsewhere".into();
        assert_eq!(c.hash(), d.hash());
        d.seed = 10;
        assert_ne!(c.hash(), d.hash());
    }
}
