//! Bidirectional LSTM sentence encoder with max-pooling, and the
//! max-pool attribution used to pick the important words of a message.

mod embedding;
mod lstm;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{EmbeddingTable, UNK_TOKEN};
pub use lstm::{LstmCell, LstmTrace};

pub const ENCODER_FORMAT: &str = "tweetsense-encoder";
pub const ENCODER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderRole {
    Target,
    Context,
    Reply,
    Selection,
}

/// Weights of both directions of one BiLSTM encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub role: EncoderRole,
    pub forward: LstmCell,
    pub backward: LstmCell,
    /// Frozen encoders receive no gradient.
    #[serde(default)]
    pub frozen: bool,
}

/// `T x 2H` per-token hidden states: forward half, then backward half.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenMatrix {
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl HiddenMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("ragged hidden matrix".into()));
        }
        Ok(HiddenMatrix {
            rows: rows.len(),
            width,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.data[t * self.width + d]
    }

    /// Per-column maximum and the first row index attaining it.
    pub fn column_max(&self) -> (Vec<f64>, Vec<usize>) {
        let mut best = vec![f64::NEG_INFINITY; self.width];
        let mut arg = vec![0; self.width];
        for t in 0..self.rows {
            for (d, &v) in self.row(t).iter().enumerate() {
                if v > best[d] {
                    best[d] = v;
                    arg[d] = t;
                }
            }
        }
        (best, arg)
    }
}

/// Max-pooled sentence embedding.
pub fn sentence_embedding(hidden: &HiddenMatrix) -> Vec<f64> {
    hidden.column_max().0
}

/// Fraction of columns in which each row attains the column maximum (ties
/// go to the smallest row index).
pub fn importance_scores(hidden: &HiddenMatrix) -> Vec<f64> {
    let mut counts = vec![0usize; hidden.rows()];
    if hidden.rows() == 0 || hidden.width() == 0 {
        return vec![0.0; hidden.rows()];
    }
    for t in hidden.column_max().1 {
        counts[t] += 1;
    }
    let width = hidden.width() as f64;
    counts.into_iter().map(|c| c as f64 / width).collect()
}

/// Tokens scoring at least the uniform share `1/T`.
pub fn select_important<S: AsRef<str>>(tokens: &[S], scores: &[f64]) -> BTreeSet<String> {
    assert_eq!(tokens.len(), scores.len(), "one score per token");
    let t = tokens.len() as f64;
    tokens
        .iter()
        .zip(scores)
        // count-based comparison: score * T >= 1 avoids 1/T rounding
        .filter(|(_, &s)| s * t >= 1.0 - 1e-12)
        .map(|(tok, _)| tok.as_ref().to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    pub tweet_id: String,
    pub scores: Vec<f64>,
    pub selected: BTreeSet<String>,
}

impl ImportanceProfile {
    /// Profile of a tokenized message; an empty token list gives an empty
    /// profile.
    pub fn compute<S: AsRef<str>>(
        tweet_id: &str,
        params: &EncoderParams,
        embeddings: &EmbeddingTable,
        tokens: &[S],
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Ok(ImportanceProfile {
                tweet_id: tweet_id.to_string(),
                scores: Vec::new(),
                selected: BTreeSet::new(),
            });
        }
        let hidden = params.encode(embeddings, tokens)?;
        let scores = importance_scores(&hidden);
        let selected = select_important(tokens, &scores);
        Ok(ImportanceProfile {
            tweet_id: tweet_id.to_string(),
            scores,
            selected,
        })
    }
}

/// Forward activations of one encoded sequence, kept for backprop.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    inputs: Vec<Vec<f64>>,
    forward: LstmTrace,
    backward: LstmTrace,
    hidden: HiddenMatrix,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
}

impl EncoderTrace {
    pub fn hidden(&self) -> &HiddenMatrix {
        &self.hidden
    }

    pub fn embedding(&self) -> &[f64] {
        &self.pooled
    }

    /// Row chosen by max-pooling in each output dimension.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Flat gradients matching an [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

impl EncoderGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        EncoderGrads {
            forward: vec![0.0; params.forward.weights().len()],
            backward: vec![0.0; params.backward.weights().len()],
        }
    }

    pub fn add_assign(&mut self, other: &EncoderGrads) {
        for (a, b) in self.forward.iter_mut().zip(&other.forward) {
            *a += b;
        }
        for (a, b) in self.backward.iter_mut().zip(&other.backward) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.forward.iter_mut().chain(self.backward.iter_mut()).for_each(|v| *v *= k);
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.forward.iter().chain(&self.backward)
    }
}

impl EncoderParams {
    pub fn seeded(role: EncoderRole, input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EncoderParams {
            role,
            forward: LstmCell::seeded(input_dim, hidden, &mut rng),
            backward: LstmCell::seeded(input_dim, hidden, &mut rng),
            frozen: false,
        }
    }

    pub fn zeros(role: EncoderRole, input_dim: usize, hidden: usize) -> Self {
        EncoderParams {
            role,
            forward: LstmCell::zeros(input_dim, hidden),
            backward: LstmCell::zeros(input_dim, hidden),
            frozen: false,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    /// Width of the sentence embedding, `2H`.
    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.forward.is_consistent()
            && self.backward.is_consistent()
            && self.forward.input_dim() == self.backward.input_dim()
            && self.forward.hidden() == self.backward.hidden()
            && self.forward.weights().iter().chain(self.backward.weights()).all(|w| w.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("inconsistent {:?} encoder parameters", self.role)))
        }
    }

    /// Swaps the two directions (used by symmetry checks).
    pub fn mirrored(&self) -> Self {
        EncoderParams {
            role: self.role,
            forward: self.backward.clone(),
            backward: self.forward.clone(),
            frozen: self.frozen,
        }
    }

    pub fn encode<S: AsRef<str>>(&self, embeddings: &EmbeddingTable, tokens: &[S]) -> Result<HiddenMatrix> {
        Ok(self.trace(embeddings, tokens)?.hidden)
    }

    pub fn trace<S: AsRef<str>>(&self, embeddings: &EmbeddingTable, tokens: &[S]) -> Result<EncoderTrace> {
        if embeddings.dim() != self.input_dim() {
            return Err(Error::Shape(format!(
                "embedding dim {} does not match encoder input {}",
                embeddings.dim(),
                self.input_dim()
            )));
        }
        let inputs: Vec<Vec<f64>> = tokens.iter().map(|t| embeddings.lookup(t.as_ref()).to_vec()).collect();
        self.trace_vectors(inputs)
    }

    pub fn trace_vectors(&self, inputs: Vec<Vec<f64>>) -> Result<EncoderTrace> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence);
        }
        let t_len = inputs.len();
        let h = self.hidden();
        let fwd_in: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let bwd_in: Vec<&[f64]> = fwd_in.iter().rev().copied().collect();
        let forward = self.forward.forward(&fwd_in);
        let backward = self.backward.forward(&bwd_in);
        let mut data = Vec::with_capacity(t_len * 2 * h);
        for t in 0..t_len {
            data.extend_from_slice(forward.hidden_at(t));
            data.extend_from_slice(backward.hidden_at(t_len - 1 - t));
        }
        let hidden = HiddenMatrix {
            rows: t_len,
            width: 2 * h,
            data,
        };
        let (pooled, argmax) = hidden.column_max();
        Ok(EncoderTrace {
            inputs,
            forward,
            backward,
            hidden,
            pooled,
            argmax,
        })
    }

    /// Backpropagates a gradient on the pooled embedding into `grads`.
    pub fn backward(&self, trace: &EncoderTrace, d_embedding: &[f64], grads: &mut EncoderGrads) {
        if self.frozen {
            return;
        }
        let h = self.hidden();
        let t_len = trace.hidden.rows();
        debug_assert_eq!(d_embedding.len(), 2 * h);
        let mut d_fwd = vec![0.0; t_len * h];
        let mut d_bwd = vec![0.0; t_len * h];
        for (d, &g) in d_embedding.iter().enumerate() {
            let t = trace.argmax[d];
            if d < h {
                d_fwd[t * h + d] += g;
            } else {
                let s = t_len - 1 - t;
                d_bwd[s * h + (d - h)] += g;
            }
        }
        let fwd_in: Vec<&[f64]> = trace.inputs.iter().map(Vec::as_slice).collect();
        let bwd_in: Vec<&[f64]> = fwd_in.iter().rev().copied().collect();
        self.forward.backward(&fwd_in, &trace.forward, &d_fwd, &mut grads.forward);
        self.backward.backward(&bwd_in, &trace.backward, &d_bwd, &mut grads.backward);
    }

    pub fn param_count(&self) -> usize {
        self.forward.weights().len() + self.backward.weights().len()
    }

    /// Mutable access to parameter `k` in the flat order used by
    /// [`EncoderGrads::iter`].
    pub fn param_mut(&mut self, k: usize) -> &mut f64 {
        let n = self.forward.weights().len();
        if k < n {
            &mut self.forward.weights_mut()[k]
        } else {
            &mut self.backward.weights_mut()[k - n]
        }
    }
}

/// Output of [`encoder_forward_backward`].
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub embeddings: Vec<Vec<f64>>,
    /// Mean of per-example losses.
    pub loss: f64,
    /// Gradient of the mean loss.
    pub grads: EncoderGrads,
}

/// Encodes each `(id, tokens)` example and backpropagates a caller-supplied
/// loss. `loss` maps an example position and its embedding to the example
/// loss and its gradient with respect to the embedding.
pub fn encoder_forward_backward<S, F>(
    params: &EncoderParams,
    embeddings: &EmbeddingTable,
    batch: &[(String, Vec<S>)],
    loss: F,
) -> Result<BatchGradients>
where
    S: AsRef<str>,
    F: Fn(usize, &[f64]) -> (f64, Vec<f64>),
{
    if batch.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut grads = EncoderGrads::zeros_like(params);
    let mut total = 0.0;
    let mut out = Vec::with_capacity(batch.len());
    for (pos, (id, tokens)) in batch.iter().enumerate() {
        let trace = params.trace(embeddings, tokens)?;
        let (l, d_emb) = loss(pos, trace.embedding());
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { example_id: id.clone() });
        }
        total += l;
        params.backward(&trace, &d_emb, &mut grads);
        out.push(trace.pooled);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok(BatchGradients {
        embeddings: out,
        loss: total / n,
        grads,
    })
}
