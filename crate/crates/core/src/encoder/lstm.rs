//! Single-direction LSTM with backpropagation through time.
//!
//! Gate layout in the stacked pre-activation vector is `[input, forget,
//! cell, output]`. Parameters live in one flat vector: input weights
//! (`4H x D`, row-major), recurrent weights (`4H x H`), then the bias (`4H`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    input_dim: usize,
    hidden: usize,
    weights: Vec<f64>,
}

/// Activations saved by [`LstmCell::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    hidden: usize,
    /// Per step: gates `[i, f, g, o]` (post-activation), then `c`, then `tanh(c)`.
    steps: Vec<f64>,
    /// Hidden state after each step.
    pub h: Vec<f64>,
}

impl LstmTrace {
    fn stride(&self) -> usize {
        6 * self.hidden
    }

    pub fn len(&self) -> usize {
        self.h.len() / self.hidden.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn hidden_at(&self, t: usize) -> &[f64] {
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }

    fn cell_at(&self, t: usize) -> &[f64] {
        let s = t * self.stride() + 4 * self.hidden;
        &self.steps[s..s + self.hidden]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LstmCell {
    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        4 * hidden * (input_dim + hidden + 1)
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmCell {
            input_dim,
            hidden,
            weights: vec![0.0; Self::param_count(input_dim, hidden)],
        }
    }

    /// Uniform initialization in `[-1/sqrt(H), 1/sqrt(H))`.
    pub fn seeded(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let weights = (0..Self::param_count(input_dim, hidden))
            .map(|_| rng.random_range(-k..k))
            .collect();
        LstmCell {
            input_dim,
            hidden,
            weights,
        }
    }

    pub fn from_seed(input_dim: usize, hidden: usize, seed: u64) -> Self {
        Self::seeded(input_dim, hidden, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn is_consistent(&self) -> bool {
        self.hidden > 0 && self.weights.len() == Self::param_count(self.input_dim, self.hidden)
    }

    fn offsets(&self) -> (usize, usize) {
        let g = 4 * self.hidden;
        (g * self.input_dim, g * (self.input_dim + self.hidden))
    }

    /// Runs the cell over `inputs` in the given order from a zero state.
    pub fn forward(&self, inputs: &[&[f64]]) -> LstmTrace {
        let h_dim = self.hidden;
        let d = self.input_dim;
        let g4 = 4 * h_dim;
        let (u_off, b_off) = self.offsets();
        let w = &self.weights[..u_off];
        let u = &self.weights[u_off..b_off];
        let b = &self.weights[b_off..];

        let mut steps = Vec::with_capacity(inputs.len() * 6 * h_dim);
        let mut hs = Vec::with_capacity(inputs.len() * h_dim);
        let mut h_prev = vec![0.0; h_dim];
        let mut c_prev = vec![0.0; h_dim];
        let mut z = vec![0.0; g4];
        for x in inputs {
            debug_assert_eq!(x.len(), d);
            for r in 0..g4 {
                let wr = &w[r * d..(r + 1) * d];
                let ur = &u[r * h_dim..(r + 1) * h_dim];
                let mut acc = b[r];
                for k in 0..d {
                    acc += wr[k] * x[k];
                }
                for k in 0..h_dim {
                    acc += ur[k] * h_prev[k];
                }
                z[r] = acc;
            }
            let base = steps.len();
            steps.resize(base + 6 * h_dim, 0.0);
            let st = &mut steps[base..];
            for j in 0..h_dim {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h_dim + j]);
                let g = z[2 * h_dim + j].tanh();
                let o = sigmoid(z[3 * h_dim + j]);
                let c = f * c_prev[j] + i * g;
                let tc = c.tanh();
                st[j] = i;
                st[h_dim + j] = f;
                st[2 * h_dim + j] = g;
                st[3 * h_dim + j] = o;
                st[4 * h_dim + j] = c;
                st[5 * h_dim + j] = tc;
                c_prev[j] = c;
                h_prev[j] = o * tc;
            }
            hs.extend_from_slice(&h_prev);
        }
        LstmTrace {
            hidden: h_dim,
            steps,
            h: hs,
        }
    }

    /// Accumulates parameter gradients into `grad` given the loss gradient
    /// with respect to each step's hidden state (`d_h`, `T x H`).
    pub fn backward(&self, inputs: &[&[f64]], trace: &LstmTrace, d_h: &[f64], grad: &mut [f64]) {
        let h_dim = self.hidden;
        let d = self.input_dim;
        let g4 = 4 * h_dim;
        let steps = inputs.len();
        debug_assert_eq!(d_h.len(), steps * h_dim);
        debug_assert_eq!(grad.len(), self.weights.len());
        let (u_off, b_off) = self.offsets();
        let u = &self.weights[u_off..b_off];

        let mut dh_next = vec![0.0; h_dim];
        let mut dc_next = vec![0.0; h_dim];
        let mut dz = vec![0.0; g4];
        let zeros = vec![0.0; h_dim];
        for t in (0..steps).rev() {
            let st = &trace.steps[t * trace.stride()..(t + 1) * trace.stride()];
            let c_prev = if t > 0 { trace.cell_at(t - 1) } else { &zeros[..] };
            for j in 0..h_dim {
                let (i, f, g, o) = (st[j], st[h_dim + j], st[2 * h_dim + j], st[3 * h_dim + j]);
                let tc = st[5 * h_dim + j];
                let dh = d_h[t * h_dim + j] + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev[j];
                dc_next[j] = dc * f;
                dz[j] = d_i * i * (1.0 - i);
                dz[h_dim + j] = d_f * f * (1.0 - f);
                dz[2 * h_dim + j] = d_g * (1.0 - g * g);
                dz[3 * h_dim + j] = d_o * o * (1.0 - o);
            }
            let x = inputs[t];
            let h_prev = if t > 0 { trace.hidden_at(t - 1) } else { &zeros[..] };
            let (gw, rest) = grad.split_at_mut(u_off);
            let (gu, gb) = rest.split_at_mut(b_off - u_off);
            for r in 0..g4 {
                let dzr = dz[r];
                if dzr == 0.0 {
                    continue;
                }
                let gwr = &mut gw[r * d..(r + 1) * d];
                for k in 0..d {
                    gwr[k] += dzr * x[k];
                }
                let gur = &mut gu[r * h_dim..(r + 1) * h_dim];
                for k in 0..h_dim {
                    gur[k] += dzr * h_prev[k];
                }
                gb[r] += dzr;
            }
            dh_next.fill(0.0);
            for r in 0..g4 {
                let dzr = dz[r];
                let ur = &u[r * h_dim..(r + 1) * h_dim];
                for k in 0..h_dim {
                    dh_next[k] += ur[k] * dzr;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_state() {
        let cell = LstmCell::zeros(3, 2);
        let x = [1.0, -2.0, 0.5];
        let tr = cell.forward(&[&x, &x]);
        // i = f = o = 0.5, g = tanh(0) = 0, so c and h stay at zero.
        assert!(tr.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seeded_init_is_deterministic() {
        assert_eq!(LstmCell::from_seed(4, 3, 9), LstmCell::from_seed(4, 3, 9));
        assert_ne!(LstmCell::from_seed(4, 3, 9), LstmCell::from_seed(4, 3, 10));
        let c = LstmCell::from_seed(4, 3, 9);
        assert!(c.weights().iter().all(|w| w.abs() <= 1.0 / 3f64.sqrt()));
        assert!(c.is_consistent());
    }
}
