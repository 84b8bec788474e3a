use serde::{Deserialize, Serialize};

use crate::synth::{DegradationKind, K};

/// Largest double below 1. Saturated sigmoids are pinned here so a
/// probability never reads as certainty.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        (1.0 / (1.0 + (-z).exp())).min(ONE_MINUS_ULP)
    } else {
        let e = z.exp();
        (e / (1.0 + e)).max(f64::MIN_POSITIVE)
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Independent per-class probabilities (multi-label).
    #[default]
    Sigmoid,
    /// One distribution over the classes (single-label).
    Softmax,
}

impl std::str::FromStr for OutputMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Self::Sigmoid),
            "softmax" => Ok(Self::Softmax),
            other => Err(format!("unknown output mode {other:?}")),
        }
    }
}

/// Raw class scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitVector(pub [f64; K]);

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProbabilityError {
    #[error("probability {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("softmax probabilities sum to {0}")]
    NotNormalized(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    p: [f64; K],
    mode: OutputMode,
}

impl ProbabilityVector {
    /// Validates range (and normalization for softmax, to 1e-9).
    pub fn new(p: [f64; K], mode: OutputMode) -> Result<Self, ProbabilityError> {
        if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ProbabilityError::OutOfRange { index, value });
        }
        if mode == OutputMode::Softmax {
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(ProbabilityError::NotNormalized(s));
            }
        }
        Ok(Self { p, mode })
    }

    pub fn sigmoid(p: [f64; K]) -> Result<Self, ProbabilityError> {
        Self::new(p, OutputMode::Sigmoid)
    }

    pub fn from_logits(z: &LogitVector, mode: OutputMode) -> Self {
        let p = match mode {
            OutputMode::Sigmoid => z.0.map(sigmoid),
            OutputMode::Softmax => {
                let s = softmax(&z.0);
                std::array::from_fn(|i| s[i])
            }
        };
        Self { p, mode }
    }

    #[inline]
    pub fn values(&self) -> &[f64; K] {
        &self.p
    }

    #[inline]
    pub fn mode(&self) -> OutputMode {
        self.mode
    }

    #[inline]
    pub fn get(&self, kind: DegradationKind) -> f64 {
        self.p[kind.index()]
    }

    /// Most probable class; ties resolve to the lower index.
    pub fn argmax(&self) -> DegradationKind {
        let mut best = 0;
        for i in 1..K {
            if self.p[i] > self.p[best] {
                best = i;
            }
        }
        DegradationKind::from_index(best).expect("index < K")
    }
}
