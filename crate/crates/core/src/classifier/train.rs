use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Channels, ModelCheckpoint, ModelGrads};
use super::{ChannelBundle, DEFAULT_THRESHOLD};
use crate::bootstrap::keyword_dropout;
use crate::encoder::EmbeddingTable;
use crate::error::{Error, Result};
use crate::ontology::{EventCategory, KeywordLexicon, LabelSet, NUM_CLASSES};
use crate::seed;
use crate::wsd::{LabeledExample, Provenance};

/// Examples whose gradients are summed together on one worker.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Hidden units per LSTM direction.
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub threshold: f64,
    pub channels: Channels,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 300,
            epochs: 10,
            learning_rate: 1e-4,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            threshold: DEFAULT_THRESHOLD,
            channels: Channels::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.hidden == 0 {
            return bad("classifier hidden size must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("Adam moments must be in [0, 1) and epsilon positive");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("decision threshold must be in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExample {
    pub bundle: ChannelBundle,
    pub labels: LabelSet,
}

/// Keyword covering applied to every channel while training.
#[derive(Debug, Clone, Copy)]
pub struct KeywordCover<'a> {
    pub lexicon: &'a KeywordLexicon,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean example loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub class_sizes: Vec<usize>,
}

/// `lambda_c` proportional to `1 / size_c` (empty classes count as one),
/// scaled so the weights sum to the number of classes.
pub fn class_weights(sizes: &[usize]) -> Vec<f64> {
    let inv: Vec<f64> = sizes.iter().map(|&s| 1.0 / s.max(1) as f64).collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|v| v * sizes.len() as f64 / total).collect()
}

fn class_sizes(examples: &[TrainExample]) -> Vec<usize> {
    let mut sizes = vec![0; NUM_CLASSES];
    for e in examples {
        for c in e.labels.iter() {
            sizes[c.ordinal()] += 1;
        }
    }
    sizes
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &mut ModelCheckpoint) -> Self {
        let shapes: Vec<usize> = model.params_mut().iter().map(|s| s.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut ModelCheckpoint, grads: &ModelGrads, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let params = model.params_mut();
        for (k, (p, g)) in params.into_iter().zip(grads.slices()).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Mean loss and mean gradient over `batch`. Chunks are summed in a fixed
/// order, so the result does not depend on the thread count.
fn batch_gradient(
    model: &ModelCheckpoint,
    emb: &EmbeddingTable,
    batch: &[(&ChannelBundle, LabelSet)],
) -> Result<(f64, ModelGrads)> {
    let partial: Vec<Result<(f64, ModelGrads)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = ModelGrads::zeros_like(model);
            let mut loss = 0.0;
            for (b, labels) in chunk {
                loss += model.accumulate_grad(emb, b, *labels, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect();
    let mut total = ModelGrads::zeros_like(model);
    let mut loss = 0.0;
    for p in partial {
        let (l, g) = p?;
        loss += l;
        total.add_assign(&g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((loss / n, total))
}

/// Trains a fresh, seeded model with Adam on mini-batches. Example order is
/// reshuffled every epoch; keyword covering, when given, is redrawn every
/// epoch.
pub fn train(
    examples: &[TrainExample],
    emb: &EmbeddingTable,
    config: &TrainConfig,
    cover: Option<KeywordCover<'_>>,
) -> Result<(ModelCheckpoint, TrainReport)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let sizes = class_sizes(examples);
    let found = sizes.iter().filter(|&&s| s > 0).count();
    if found < 2 {
        return Err(Error::TooFewClasses { found });
    }
    if let Some(e) = examples.iter().find(|e| e.bundle.target.is_empty()) {
        return Err(Error::UnknownTweet(format!("{} has no tokens", e.bundle.tweet_id)));
    }
    let mut model = ModelCheckpoint::init(config, emb.dim(), class_weights(&sizes));
    let mut adam = Adam::new(&mut model);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "classifier/shuffle"));
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        class_sizes: sizes,
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let covered: Option<Vec<ChannelBundle>> = cover.map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, &format!("classifier/cover/{epoch}")));
            order
                .iter()
                .map(|&i| {
                    let mut b = examples[i].bundle.clone();
                    for toks in b.tokens_mut() {
                        let positions = c.lexicon.keyword_positions(toks);
                        *toks = keyword_dropout(toks, &positions, c.rate, &mut rng);
                    }
                    b
                })
                .collect()
        });
        let inputs: Vec<(&ChannelBundle, LabelSet)> = order
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let b = covered.as_ref().map_or(&examples[i].bundle, |c| &c[k]);
                (b, examples[i].labels)
            })
            .collect();
        let mut epoch_loss = 0.0;
        for batch in inputs.chunks(config.batch_size) {
            let (loss, grads) = batch_gradient(&model, emb, batch).inspect_err(|e| {
                log::error!("training aborted in epoch {epoch}: {e}");
            })?;
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut model, &grads, config);
        }
        let mean = epoch_loss / examples.len() as f64;
        log::info!("epoch {}/{}: loss {mean:.6}", epoch + 1, config.epochs);
        report.epoch_losses.push(mean);
    }
    Ok((model, report))
}

/// Draws up to `n` messages from `pool`, skipping ids in `exclude`, as
/// `{Other}` negatives. Returns a warning when too few candidates remain.
pub fn sample_negatives(
    pool: &[String],
    exclude: &HashSet<String>,
    n: usize,
    seed: u64,
) -> (Vec<LabeledExample>, Option<String>) {
    let candidates: Vec<&String> = pool.iter().filter(|id| !exclude.contains(*id)).collect();
    let mut warning = None;
    let picked: Vec<&String> = if candidates.len() <= n {
        if candidates.len() < n {
            warning = Some(format!(
                "requested {n} negatives but only {} unlabeled candidates remain",
                candidates.len()
            ));
        }
        candidates
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, candidates.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| candidates[i]).collect()
    };
    let examples = picked
        .into_iter()
        .map(|id| LabeledExample {
            tweet_id: id.clone(),
            labels: LabelSet::single(EventCategory::Other),
            provenance: Provenance::NegativeSample,
        })
        .collect();
    (examples, warning)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_ratio_and_sum() {
        let mut sizes = vec![0; NUM_CLASSES];
        sizes[0] = 100;
        sizes[1] = 50;
        let w = class_weights(&sizes);
        assert!((w[1] / w[0] - 2.0).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 10.0).abs() < 1e-12);
        let base: Vec<usize> = (1..=NUM_CLASSES).map(|i| i * 3).collect();
        let scaled: Vec<usize> = base.iter().map(|s| s * 7).collect();
        for (a, b) in class_weights(&base).iter().zip(class_weights(&scaled)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn negatives() {
        let pool: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        let (all, warn) = sample_negatives(&pool, &HashSet::new(), 50, 1);
        assert_eq!(all.len(), 10);
        assert!(warn.is_some());
        let ex: HashSet<String> = ["t3".to_string()].into();
        let (a, w) = sample_negatives(&pool, &ex, 4, 9);
        let (b, _) = sample_negatives(&pool, &ex, 4, 9);
        assert!(w.is_none());
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|e| e.tweet_id != "t3" && e.provenance == Provenance::NegativeSample));
    }

    fn toy() -> (Vec<TrainExample>, EmbeddingTable) {
        let words = ["flood", "water", "dead", "killed", "the", "a"];
        let emb = EmbeddingTable::random(words, 6, 2);
        let mut ex = Vec::new();
        for i in 0..24 {
            let (toks, cat) = if i % 2 == 0 {
                (vec!["the", "flood", "water"], EventCategory::Fci)
            } else {
                (vec!["a", "dead", "killed"], EventCategory::Cas)
            };
            ex.push(TrainExample {
                bundle: ChannelBundle::target_only(format!("t{i}"), toks.into_iter().map(String::from).collect()),
                labels: LabelSet::single(cat),
            });
        }
        (ex, emb)
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let (ex, emb) = toy();
        let cfg = TrainConfig { hidden: 3, epochs: 0, seed: 5, ..TrainConfig::default() };
        let (m, _) = train(&ex, &emb, &cfg, None).unwrap();
        let init = ModelCheckpoint::init(&cfg, 6, class_weights(&class_sizes(&ex)));
        assert_eq!(m, init);
    }

    #[test]
    fn single_class_rejected() {
        let (mut ex, emb) = toy();
        ex.retain(|e| e.labels.contains(EventCategory::Cas));
        let cfg = TrainConfig { hidden: 2, epochs: 1, ..TrainConfig::default() };
        assert!(matches!(train(&ex, &emb, &cfg, None), Err(Error::TooFewClasses { found: 1 })));
        assert!(matches!(train(&[], &emb, &cfg, None), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn separable_data_is_learned() {
        let (ex, emb) = toy();
        let cfg = TrainConfig {
            hidden: 4,
            epochs: 30,
            learning_rate: 0.02,
            batch_size: 8,
            seed: 1,
            ..TrainConfig::default()
        };
        let (m, report) = train(&ex, &emb, &cfg, None).unwrap();
        let drops = report.epoch_losses.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(drops as f64 >= 0.9 * 29.0, "{:?}", report.epoch_losses);
        for e in &ex {
            assert_eq!(m.predict_one(&emb, &e.bundle).unwrap().labels, e.labels);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (ex, emb) = toy();
        let cfg = TrainConfig { hidden: 3, epochs: 3, learning_rate: 0.01, batch_size: 5, seed: 8, ..TrainConfig::default() };
        let lex = KeywordLexicon::default();
        let cover = Some(KeywordCover { lexicon: &lex, rate: 0.5 });
        let a = train(&ex, &emb, &cfg, cover).unwrap();
        let b = train(&ex, &emb, &cfg, cover).unwrap();
        assert_eq!(a, b);
    }
}
