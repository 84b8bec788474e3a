//! Threshold routing: probabilities to the Undamaged / Single / Multiple
//! verdict, plus the three severity bands.

use serde::{Deserialize, Serialize};

use crate::classify::{OutputMode, ProbabilityVector};
use crate::synth::DegradationKind;

pub const DEFAULT_THETA: f64 = 0.85;
pub const DEFAULT_BAND_LOW: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RouteError {
    #[error("routing needs sigmoid probabilities, got softmax")]
    WrongMode,
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("need 0 < band_low ({band_low}) < theta ({theta}) < 1")]
    InvalidConfig { theta: f64, band_low: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouterConfig {
    pub theta: f64,
    pub band_low: f64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, band_low: DEFAULT_BAND_LOW }
    }
}

impl RouterConfig {
    pub fn new(theta: f64, band_low: f64) -> Result<Self, RouteError> {
        let cfg = Self { theta, band_low };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_theta(theta: f64) -> Result<Self, RouteError> {
        Self::new(theta, DEFAULT_BAND_LOW.min(theta / 2.0))
    }

    pub fn validate(&self) -> Result<(), RouteError> {
        if 0.0 < self.band_low && self.band_low < self.theta && self.theta < 1.0 {
            Ok(())
        } else {
            Err(RouteError::InvalidConfig { theta: self.theta, band_low: self.band_low })
        }
    }

    /// Band of `p` under this configuration's boundaries.
    pub fn band(&self, p: f64) -> Result<SeverityBand, RouteError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(RouteError::OutOfRange(p));
        }
        Ok(if p >= self.theta {
            SeverityBand::Significant
        } else if p >= self.band_low {
            SeverityBand::Tolerable
        } else {
            SeverityBand::None
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeverityBand {
    None,
    Tolerable,
    Significant,
}

/// Band under the default 0.5 / 0.85 boundaries. Lower bounds inclusive.
pub fn band(p: f64) -> Result<SeverityBand, RouteError> {
    RouterConfig::default().band(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Active {
    pub kind: DegradationKind,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Undamaged,
    Single { kind: DegradationKind, p: f64 },
    /// At least two entries, descending by `p`, ties by kind index.
    Multiple(Vec<Active>),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Undamaged => "Undamaged",
            Verdict::Single { .. } => "Single",
            Verdict::Multiple(_) => "Multiple",
        }
    }

    pub fn active(&self) -> Vec<Active> {
        match self {
            Verdict::Undamaged => Vec::new(),
            Verdict::Single { kind, p } => vec![Active { kind: *kind, p: *p }],
            Verdict::Multiple(a) => a.clone(),
        }
    }
}

/// Applies the `p_i >= theta` indicator to every class.
pub fn decide(probs: &ProbabilityVector, cfg: &RouterConfig) -> Result<Verdict, RouteError> {
    if probs.mode() != OutputMode::Sigmoid {
        return Err(RouteError::WrongMode);
    }
    let mut active: Vec<Active> = DegradationKind::ALL
        .into_iter()
        .map(|kind| Active { kind, p: probs.get(kind) })
        .filter(|a| a.p >= cfg.theta)
        .collect();
    active.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.kind.cmp(&b.kind)));
    Ok(match active.len() {
        0 => Verdict::Undamaged,
        1 => Verdict::Single { kind: active[0].kind, p: active[0].p },
        _ => Verdict::Multiple(active),
    })
}

/// Log form of a routing decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: String,
    pub active: Vec<Active>,
    /// Band of every class, in kind order.
    pub bands: Vec<SeverityBand>,
}

impl VerdictRecord {
    pub fn new(verdict: &Verdict, probs: &ProbabilityVector, cfg: &RouterConfig) -> Self {
        let bands = probs
            .values()
            .iter()
            .map(|&p| cfg.band(p).expect("probabilities lie in [0, 1]"))
            .collect();
        Self { verdict: verdict.name().to_string(), active: verdict.active(), bands }
    }
}
