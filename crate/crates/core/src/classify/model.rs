//! `16 -> H -> K` classifier with one residual block:
//!
//! ```text
//! h_in = W_in f + b_in
//! h    = ReLU(W_res h_in + b_res) + h_in
//! z    = W_out h + b_out
//! ```
//!
//! Parameters live in one flat buffer so optimizers can treat the model as a
//! plain slice. Layout (row-major, one row per output unit):
//! `W_in[H x 16] | b_in[H] | W_res[H x H] | b_res[H] | W_out[K x H] | b_out[K]`.

use rand::Rng;

use super::activation::{sigmoid, softmax, softplus, LogitVector, OutputMode, ProbabilityVector};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::rng::seeded;
use crate::synth::K;

pub const INPUTS: usize = FEATURE_COUNT;
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualHead {
    hidden: usize,
    params: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Layout {
    w_in: usize,
    b_in: usize,
    w_res: usize,
    b_res: usize,
    w_out: usize,
    b_out: usize,
    end: usize,
}

impl Layout {
    fn new(h: usize) -> Self {
        let w_in = 0;
        let b_in = w_in + h * INPUTS;
        let w_res = b_in + h;
        let b_res = w_res + h * h;
        let w_out = b_res + h;
        let b_out = w_out + K * h;
        Self { w_in, b_in, w_res, b_res, w_out, b_out, end: b_out + K }
    }
}

/// Intermediate activations kept for backpropagation.
struct Trace {
    h_in: Vec<f64>,
    pre: Vec<f64>,
    h: Vec<f64>,
    z: [f64; K],
}

impl ResidualHead {
    pub fn param_count(hidden: usize) -> usize {
        Layout::new(hidden).end
    }

    pub fn zeros(hidden: usize) -> Self {
        assert!(hidden >= 1, "hidden width must be at least 1");
        Self { hidden, params: vec![0.0; Self::param_count(hidden)] }
    }

    /// Uniform `(-a, a)` weights with `a = sqrt(6 / (fan_in + fan_out))`;
    /// biases start at zero.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut m = Self::zeros(hidden);
        let l = m.layout();
        let mut rng = seeded(seed);
        let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            slice.iter_mut().for_each(|w| *w = rng.random_range(-a..a));
        };
        fill(&mut m.params[l.w_in..l.b_in], INPUTS, hidden);
        fill(&mut m.params[l.w_res..l.b_res], hidden, hidden);
        fill(&mut m.params[l.w_out..l.b_out], hidden, K);
        m
    }

    /// Rebuilds a model from a flat parameter buffer.
    pub fn from_params(hidden: usize, params: Vec<f64>) -> Option<Self> {
        (hidden >= 1 && params.len() == Self::param_count(hidden) && params.iter().all(|v| v.is_finite()))
            .then_some(Self { hidden, params })
    }

    fn layout(&self) -> Layout {
        Layout::new(self.hidden)
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    #[inline]
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    #[inline]
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w_in(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.w_in..l.b_in]
    }
    pub fn b_in(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.b_in..l.w_res]
    }
    pub fn w_res(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.w_res..l.b_res]
    }
    pub fn b_res(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.b_res..l.w_out]
    }
    pub fn w_out(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.w_out..l.b_out]
    }
    pub fn b_out(&self) -> &[f64] {
        let l = self.layout();
        &self.params[l.b_out..l.end]
    }

    /// Zeroes the residual branch's parameters, leaving a plain two-layer net.
    pub fn zero_residual(&mut self) {
        let l = self.layout();
        self.params[l.w_res..l.w_out].iter_mut().for_each(|v| *v = 0.0);
    }

    fn trace(&self, x: &[f64; INPUTS]) -> Trace {
        let hdim = self.hidden;
        let l = self.layout();
        let p = &self.params;
        let h_in: Vec<f64> = (0..hdim)
            .map(|j| {
                let row = &p[l.w_in + j * INPUTS..l.w_in + (j + 1) * INPUTS];
                p[l.b_in + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let pre: Vec<f64> = (0..hdim)
            .map(|j| {
                let row = &p[l.w_res + j * hdim..l.w_res + (j + 1) * hdim];
                p[l.b_res + j] + row.iter().zip(&h_in).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let h: Vec<f64> = pre.iter().zip(&h_in).map(|(a, skip)| a.max(0.0) + skip).collect();
        let z = std::array::from_fn(|k| {
            let row = &p[l.w_out + k * hdim..l.w_out + (k + 1) * hdim];
            p[l.b_out + k] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>()
        });
        Trace { h_in, pre, h, z }
    }

    pub fn logits(&self, x: &[f64; INPUTS]) -> LogitVector {
        LogitVector(self.trace(x).z)
    }

    pub fn forward(&self, features: &FeatureVector, mode: OutputMode) -> (LogitVector, ProbabilityVector) {
        let z = self.logits(features.values());
        let p = ProbabilityVector::from_logits(&z, mode);
        (z, p)
    }

    /// Mean loss over `batch`, accumulating `dL/dparams` into `grad`.
    ///
    /// Sigmoid mode: binary cross-entropy averaged over samples and classes.
    /// Softmax mode: categorical cross-entropy against the normalized label
    /// indicator (uniform for an empty label set), averaged over samples.
    pub fn loss_and_grad(&self, batch: &[(&[f64; INPUTS], &[f64; K])], mode: OutputMode, grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.params.len());
        let hdim = self.hidden;
        let l = self.layout();
        let p = &self.params;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut dh = vec![0.0; hdim];
        let mut dh_in = vec![0.0; hdim];
        for &(x, y) in batch {
            let t = self.trace(x);
            let (sample_loss, dz) = output_loss(&t.z, y, mode);
            loss += sample_loss;
            let dz = dz.map(|d| d / n);

            // output layer
            dh.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..K {
                grad[l.b_out + k] += dz[k];
                let row = l.w_out + k * hdim;
                for j in 0..hdim {
                    grad[row + j] += dz[k] * t.h[j];
                    dh[j] += p[row + j] * dz[k];
                }
            }
            // residual block: h = relu(pre) + h_in
            dh_in.copy_from_slice(&dh);
            for i in 0..hdim {
                if t.pre[i] <= 0.0 {
                    continue;
                }
                let da = dh[i];
                grad[l.b_res + i] += da;
                let row = l.w_res + i * hdim;
                for j in 0..hdim {
                    grad[row + j] += da * t.h_in[j];
                    dh_in[j] += p[row + j] * da;
                }
            }
            // input layer
            for j in 0..hdim {
                grad[l.b_in + j] += dh_in[j];
                let row = l.w_in + j * INPUTS;
                for (i, xi) in x.iter().enumerate() {
                    grad[row + i] += dh_in[j] * xi;
                }
            }
        }
        loss / n
    }

    /// Mean loss without gradients.
    pub fn loss(&self, batch: &[(&[f64; INPUTS], &[f64; K])], mode: OutputMode) -> f64 {
        let total: f64 = batch.iter().map(|(x, y)| output_loss(&self.trace(x).z, y, mode).0).sum();
        total / batch.len() as f64
    }
}

/// Per-sample loss and its gradient with respect to the logits.
fn output_loss(z: &[f64; K], y: &[f64; K], mode: OutputMode) -> (f64, [f64; K]) {
    match mode {
        OutputMode::Sigmoid => {
            let kf = K as f64;
            let loss = (0..K).map(|k| softplus(z[k]) - y[k] * z[k]).sum::<f64>() / kf;
            (loss, std::array::from_fn(|k| (sigmoid(z[k]) - y[k]) / kf))
        }
        OutputMode::Softmax => {
            let total: f64 = y.iter().sum();
            let target: [f64; K] = if total > 0.0 { y.map(|v| v / total) } else { [1.0 / K as f64; K] };
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let loss = (0..K).map(|k| target[k] * (lse - z[k])).sum();
            let p = softmax(z);
            (loss, std::array::from_fn(|k| p[k] - target[k]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(seed: u64) -> [f64; INPUTS] {
        let mut rng = seeded(seed);
        std::array::from_fn(|_| rng.random_range(0.0..1.0))
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = ResidualHead::zeros(8);
        let (z, p) = m.forward(&FeatureVector(features(1)), OutputMode::Sigmoid);
        assert_eq!(z.0, [0.0; K]);
        assert_eq!(p.values(), &[0.5; K]);
    }

    #[test]
    fn zero_residual_is_identity_block() {
        let mut m = ResidualHead::init(12, 3);
        m.zero_residual();
        let x = features(4);
        let t = m.trace(&x);
        assert_eq!(t.h, t.h_in);
    }

    #[test]
    fn softmax_mode_sums_to_one() {
        let m = ResidualHead::init(16, 9);
        for s in 0..20 {
            let (_, p) = m.forward(&FeatureVector(features(s)), OutputMode::Softmax);
            assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn param_count_matches_layout() {
        assert_eq!(ResidualHead::param_count(32), 32 * 16 + 32 + 32 * 32 + 32 + 7 * 32 + 7);
        let m = ResidualHead::init(5, 0);
        let total = m.w_in().len() + m.b_in().len() + m.w_res().len() + m.b_res().len() + m.w_out().len() + m.b_out().len();
        assert_eq!(total, m.params().len());
    }

    #[test]
    fn init_respects_glorot_bound() {
        let m = ResidualHead::init(32, 1);
        let a = (6.0f64 / 48.0).sqrt();
        assert!(m.w_in().iter().all(|w| w.abs() < a));
        assert!(m.b_in().iter().all(|&b| b == 0.0));
        assert_eq!(m, ResidualHead::init(32, 1));
    }
}
