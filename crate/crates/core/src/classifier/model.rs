use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use super::{ChannelBundle, Prediction};
use crate::encoder::{EmbeddingTable, EncoderGrads, EncoderParams, EncoderRole, EncoderTrace};
use crate::error::{Error, Result};
use crate::ontology::{LabelSet, NUM_CLASSES};
use crate::seed;

pub const CHECKPOINT_FORMAT: &str = "tweetsense-classifier";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Which auxiliary channels contribute. A disabled channel is the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channels {
    pub context: bool,
    pub reply: bool,
}

impl Default for Channels {
    fn default() -> Self {
        Channels {
            context: true,
            reply: true,
        }
    }
}

impl Channels {
    pub fn target_only() -> Self {
        Channels {
            context: false,
            reply: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub target: EncoderParams,
    pub context: EncoderParams,
    pub reply: EncoderParams,
    /// `NUM_CLASSES x 6H`, row-major.
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
    pub class_weights: Vec<f64>,
    pub config: TrainConfig,
}

/// Gradients in the same layout as [`ModelCheckpoint::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub target: EncoderGrads,
    pub context: EncoderGrads,
    pub reply: EncoderGrads,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(model: &ModelCheckpoint) -> Self {
        ModelGrads {
            target: EncoderGrads::zeros_like(&model.target),
            context: EncoderGrads::zeros_like(&model.context),
            reply: EncoderGrads::zeros_like(&model.reply),
            output_weights: vec![0.0; model.output_weights.len()],
            output_bias: vec![0.0; model.output_bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        self.target.add_assign(&other.target);
        self.context.add_assign(&other.context);
        self.reply.add_assign(&other.reply);
        for (a, b) in self.output_weights.iter_mut().zip(&other.output_weights) {
            *a += b;
        }
        for (a, b) in self.output_bias.iter_mut().zip(&other.output_bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.target.scale(k);
        self.context.scale(k);
        self.reply.scale(k);
        self.output_weights.iter_mut().chain(self.output_bias.iter_mut()).for_each(|v| *v *= k);
    }

    pub fn slices(&self) -> [&[f64]; 8] {
        [
            &self.target.forward,
            &self.target.backward,
            &self.context.forward,
            &self.context.backward,
            &self.reply.forward,
            &self.reply.backward,
            &self.output_weights,
            &self.output_bias,
        ]
    }
}

/// Saved activations of one forward pass.
struct Pass {
    target: EncoderTrace,
    contexts: Vec<(EncoderTrace, f64)>,
    context_total: f64,
    replies: Vec<EncoderTrace>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid cross-entropy computed from the logit.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl ModelCheckpoint {
    /// Seeded initialization; encoders and output layer draw from separate
    /// derived seeds.
    pub fn init(config: &TrainConfig, input_dim: usize, class_weights: Vec<f64>) -> Self {
        let h = config.hidden;
        let s = config.seed;
        let width = 6 * h;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(s, "classifier/init/output"));
        let k = 1.0 / (width as f64).sqrt();
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            target: EncoderParams::seeded(EncoderRole::Target, input_dim, h, seed::derive(s, "classifier/init/target")),
            context: EncoderParams::seeded(EncoderRole::Context, input_dim, h, seed::derive(s, "classifier/init/context")),
            reply: EncoderParams::seeded(EncoderRole::Reply, input_dim, h, seed::derive(s, "classifier/init/reply")),
            output_weights: (0..NUM_CLASSES * width).map(|_| rng.random_range(-k..k)).collect(),
            output_bias: vec![0.0; NUM_CLASSES],
            class_weights,
            config: config.clone(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.target.hidden()
    }

    pub fn feature_dim(&self) -> usize {
        6 * self.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Shape(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        self.target.validate()?;
        self.context.validate()?;
        self.reply.validate()?;
        let h = self.hidden();
        let d = self.target.input_dim();
        for e in [&self.context, &self.reply] {
            if e.hidden() != h || e.input_dim() != d {
                return Err(Error::Shape("encoder shapes differ".into()));
            }
        }
        if self.output_weights.len() != NUM_CLASSES * 6 * h
            || self.output_bias.len() != NUM_CLASSES
            || self.class_weights.len() != NUM_CLASSES
        {
            return Err(Error::Shape("output layer does not match 6H x 10".into()));
        }
        if !self.output_weights.iter().chain(&self.output_bias).chain(&self.class_weights).all(|v| v.is_finite()) {
            return Err(Error::Shape("non-finite output parameters".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> Channels {
        self.config.channels
    }

    /// Parameter slices in a fixed order: target, context and reply encoder
    /// (forward then backward direction each), output weights, output bias.
    pub fn params_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.target.forward.weights_mut(),
            self.target.backward.weights_mut(),
            self.context.forward.weights_mut(),
            self.context.backward.weights_mut(),
            self.reply.forward.weights_mut(),
            self.reply.backward.weights_mut(),
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    fn pass(&self, emb: &EmbeddingTable, bundle: &ChannelBundle) -> Result<Pass> {
        if bundle.target.is_empty() {
            return Err(Error::EmptySequence);
        }
        let h2 = 2 * self.hidden();
        let channels = self.channels();
        let target = self.target.trace(emb, &bundle.target)?;
        let mut features = vec![0.0; 3 * h2];
        features[..h2].copy_from_slice(target.embedding());

        let mut contexts = Vec::new();
        let mut context_total = 0.0;
        if channels.context {
            for c in &bundle.contexts {
                if c.tokens.is_empty() {
                    continue;
                }
                contexts.push((self.context.trace(emb, &c.tokens)?, c.weight));
                context_total += c.weight;
            }
            for (tr, w) in &contexts {
                let a = w / context_total;
                for (f, e) in features[h2..2 * h2].iter_mut().zip(tr.embedding()) {
                    *f += a * e;
                }
            }
        }

        let mut replies = Vec::new();
        if channels.reply {
            for r in &bundle.replies {
                if !r.is_empty() {
                    replies.push(self.reply.trace(emb, r)?);
                }
            }
            let m = replies.len() as f64;
            for tr in &replies {
                for (f, e) in features[2 * h2..].iter_mut().zip(tr.embedding()) {
                    *f += e / m;
                }
            }
        }

        let width = 3 * h2;
        let logits = (0..NUM_CLASSES)
            .map(|c| {
                let row = &self.output_weights[c * width..(c + 1) * width];
                self.output_bias[c] + row.iter().zip(&features).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        Ok(Pass {
            target,
            contexts,
            context_total,
            replies,
            features,
            logits,
        })
    }

    /// `[R1, R2, R3]`, the `6H` input of the output layer.
    pub fn features(&self, emb: &EmbeddingTable, bundle: &ChannelBundle) -> Result<Vec<f64>> {
        Ok(self.pass(emb, bundle)?.features)
    }

    /// Per-class sigmoid scores.
    pub fn forward(&self, emb: &EmbeddingTable, bundle: &ChannelBundle) -> Result<Vec<f64>> {
        Ok(self.pass(emb, bundle)?.logits.into_iter().map(sigmoid).collect())
    }

    pub fn predict_one(&self, emb: &EmbeddingTable, bundle: &ChannelBundle) -> Result<Prediction> {
        let scores = self.forward(emb, bundle)?;
        Ok(Prediction::from_scores(bundle.tweet_id.clone(), scores, self.config.threshold))
    }

    fn loss_of(&self, logits: &[f64], labels: LabelSet) -> f64 {
        (0..NUM_CLASSES)
            .map(|c| {
                let y = if labels.contains(crate::ontology::EventCategory::ALL[c]) { 1.0 } else { 0.0 };
                self.class_weights[c] * bce_with_logit(logits[c], y)
            })
            .sum()
    }

    /// Class-weighted sum of per-class sigmoid cross-entropies.
    pub fn loss(&self, emb: &EmbeddingTable, bundle: &ChannelBundle, labels: LabelSet) -> Result<f64> {
        let pass = self.pass(emb, bundle)?;
        Ok(self.loss_of(&pass.logits, labels))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, emb: &EmbeddingTable, bundle: &ChannelBundle, labels: LabelSet) -> Result<(f64, ModelGrads)> {
        let mut grads = ModelGrads::zeros_like(self);
        let loss = self.accumulate_grad(emb, bundle, labels, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds this example's gradient into `grads` and returns its loss.
    pub fn accumulate_grad(
        &self,
        emb: &EmbeddingTable,
        bundle: &ChannelBundle,
        labels: LabelSet,
        grads: &mut ModelGrads,
    ) -> Result<f64> {
        let pass = self.pass(emb, bundle)?;
        let loss = self.loss_of(&pass.logits, labels);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                example_id: bundle.tweet_id.clone(),
            });
        }
        let h2 = 2 * self.hidden();
        let width = 3 * h2;
        let mut d_features = vec![0.0; width];
        for c in 0..NUM_CLASSES {
            let y = if labels.contains(crate::ontology::EventCategory::ALL[c]) { 1.0 } else { 0.0 };
            let dz = self.class_weights[c] * (sigmoid(pass.logits[c]) - y);
            grads.output_bias[c] += dz;
            let row = &self.output_weights[c * width..(c + 1) * width];
            let grow = &mut grads.output_weights[c * width..(c + 1) * width];
            for k in 0..width {
                grow[k] += dz * pass.features[k];
                d_features[k] += dz * row[k];
            }
        }
        self.target.backward(&pass.target, &d_features[..h2], &mut grads.target);
        let d_ctx = &d_features[h2..2 * h2];
        for (tr, w) in &pass.contexts {
            let a = w / pass.context_total;
            let d: Vec<f64> = d_ctx.iter().map(|g| a * g).collect();
            self.context.backward(tr, &d, &mut grads.context);
        }
        let d_rep = &d_features[2 * h2..];
        let m = pass.replies.len() as f64;
        for tr in &pass.replies {
            let d: Vec<f64> = d_rep.iter().map(|g| g / m).collect();
            self.reply.backward(tr, &d, &mut grads.reply);
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::WeightedTokens;

    fn setup(h: usize) -> (ModelCheckpoint, EmbeddingTable) {
        let emb = EmbeddingTable::random(["a", "b", "c", "d", "e"], 3, 4);
        let cfg = TrainConfig {
            hidden: h,
            seed: 3,
            ..TrainConfig::default()
        };
        (ModelCheckpoint::init(&cfg, 3, vec![1.0; NUM_CLASSES]), emb)
    }

    fn rich_bundle() -> ChannelBundle {
        ChannelBundle {
            tweet_id: "x".into(),
            target: vec!["a".into(), "b".into()],
            contexts: vec![
                WeightedTokens { tokens: vec!["c".into()], weight: 1.0 },
                WeightedTokens { tokens: vec!["d".into(), "a".into()], weight: 0.64 },
            ],
            replies: vec![vec!["e".into()]],
        }
    }

    #[test]
    fn shapes() {
        let (m, emb) = setup(4);
        m.validate().unwrap();
        assert_eq!(m.features(&emb, &rich_bundle()).unwrap().len(), 24);
        assert_eq!(m.forward(&emb, &rich_bundle()).unwrap().len(), 10);
    }

    #[test]
    fn zero_output_layer_scores_half() {
        let (mut m, emb) = setup(2);
        m.output_weights.iter_mut().for_each(|w| *w = 0.0);
        assert!(m.forward(&emb, &rich_bundle()).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn empty_target_is_error() {
        let (m, emb) = setup(2);
        let b = ChannelBundle::target_only("x", vec![]);
        assert!(matches!(m.forward(&emb, &b), Err(Error::EmptySequence)));
    }

    #[test]
    fn missing_channels_are_zero() {
        let (m, emb) = setup(3);
        let f = m.features(&emb, &ChannelBundle::target_only("x", vec!["a".into()])).unwrap();
        assert!(f[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_roundtrip_exact() {
        let (m, _) = setup(3);
        let s = serde_json::to_string(&m).unwrap();
        let back: ModelCheckpoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bce_matches_naive() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-0.1, 1.0)] {
            let s: f64 = sigmoid(z);
            let naive = -(y * s.ln() + (1.0 - y) * (1.0 - s).ln());
            assert!((bce_with_logit(z, y) - naive).abs() < 1e-12);
        }
    }
}
