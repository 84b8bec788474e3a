//! Probability-weighted fusion of several restorers' outputs:
//! `f(x) = mu * sum_i 1[p_i >= theta] p_i phi_i(x)`, `mu = 1 / sum_active p_i`.
//!
//! Super-resolution changes the frame size, so it is never summed with the
//! other branches; it is applied to the fused result instead.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::ProbabilityVector;
use crate::imaging::Image;
use crate::restore::{RestoreError, Restorer};
use crate::route::Active;
use crate::synth::DegradationKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BlendError {
    #[error("no degradation reaches the threshold")]
    NoActiveDegradation,
    #[error("{kind} restorer returned {got:?}, expected {expected:?}")]
    DimensionMismatch { kind: DegradationKind, expected: (usize, usize), got: (usize, usize) },
    #[error(transparent)]
    Restore(#[from] RestoreError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// Every restorer sees the original frame; outputs are weighted-summed.
    #[default]
    Parallel,
    /// Restorers are chained in descending probability.
    Sequential,
}

impl std::str::FromStr for BlendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "parallel" => Ok(BlendMode::Parallel),
            "sequential" => Ok(BlendMode::Sequential),
            other => Err(format!("unknown blend mode {other:?}")),
        }
    }
}

/// Active kinds (descending `p`, ties by kind index) and their normalized weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub entries: Vec<Active>,
    pub weights: Vec<f64>,
}

impl ActiveSet {
    pub fn from_entries(mut entries: Vec<Active>) -> Result<Self, BlendError> {
        if entries.is_empty() {
            return Err(BlendError::NoActiveDegradation);
        }
        entries.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.kind.cmp(&b.kind)));
        let weights = normalize(&entries.iter().map(|e| e.p).collect::<Vec<_>>());
        Ok(Self { entries, weights })
    }

    pub fn kinds(&self) -> impl Iterator<Item = DegradationKind> + '_ {
        self.entries.iter().map(|e| e.kind)
    }

    pub fn contains(&self, kind: DegradationKind) -> bool {
        self.kinds().any(|k| k == kind)
    }
}

/// `p_i / sum(p)`.
pub fn normalize(p: &[f64]) -> Vec<f64> {
    let mu = 1.0 / p.iter().sum::<f64>();
    p.iter().map(|v| v * mu).collect()
}

pub fn weights(probs: &ProbabilityVector, theta: f64) -> Result<ActiveSet, BlendError> {
    let entries = DegradationKind::ALL
        .into_iter()
        .map(|kind| Active { kind, p: probs.get(kind) })
        .filter(|a| a.p >= theta)
        .collect();
    ActiveSet::from_entries(entries)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlendOutcome {
    pub image: Image,
    /// Restorer fallbacks that happened along the way.
    pub warnings: Vec<String>,
    /// Time spent in the weighted sum, excluding the restorers.
    pub fuse_ms: f64,
}

pub fn aggregate(
    image: &Image,
    probs: &ProbabilityVector,
    theta: f64,
    restorer: &impl Restorer,
) -> Result<Image, BlendError> {
    let active = weights(probs, theta)?;
    aggregate_active(image, &active, restorer, BlendMode::Parallel).map(|o| o.image)
}

pub fn aggregate_active(
    image: &Image,
    active: &ActiveSet,
    restorer: &impl Restorer,
    mode: BlendMode,
) -> Result<BlendOutcome, BlendError> {
    let mut warnings = Vec::new();
    let mut fuse_ms = 0.0;
    let run = |kind: DegradationKind, img: &Image, warnings: &mut Vec<String>| -> Result<Image, BlendError> {
        let (out, warning) = restorer.restore_with_warning(kind, img)?;
        warnings.extend(warning);
        Ok(out)
    };
    let same_size: Vec<(DegradationKind, f64)> = active
        .entries
        .iter()
        .filter(|e| e.kind != DegradationKind::SuperResolution)
        .map(|e| (e.kind, e.p))
        .collect();

    let fused = match (same_size.len(), mode) {
        (0, _) => image.clone(),
        (1, _) => run(same_size[0].0, image, &mut warnings)?,
        (_, BlendMode::Sequential) => {
            let mut cur = image.clone();
            for &(kind, _) in &same_size {
                cur = run(kind, &cur, &mut warnings)?;
            }
            cur
        }
        (_, BlendMode::Parallel) => {
            let branches: Vec<Result<(Image, Option<String>), RestoreError>> = same_size
                .par_iter()
                .map(|&(kind, _)| restorer.restore_with_warning(kind, image))
                .collect();
            let mut outputs = Vec::with_capacity(branches.len());
            for ((kind, _), b) in same_size.iter().zip(branches) {
                let (out, warning) = b?;
                if out.dims() != image.dims() {
                    return Err(BlendError::DimensionMismatch { kind: *kind, expected: image.dims(), got: out.dims() });
                }
                warnings.extend(warning);
                outputs.push(out);
            }
            let w = normalize(&same_size.iter().map(|&(_, p)| p).collect::<Vec<_>>());
            let t = std::time::Instant::now();
            let sum = weighted_sum(&outputs, &w);
            fuse_ms = t.elapsed().as_secs_f64() * 1e3;
            sum
        }
    };

    let image = if active.contains(DegradationKind::SuperResolution) {
        run(DegradationKind::SuperResolution, &fused, &mut warnings)?
    } else {
        fused
    };
    Ok(BlendOutcome { image, warnings, fuse_ms })
}

fn weighted_sum(images: &[Image], w: &[f64]) -> Image {
    let (width, height) = images[0].dims();
    let mut acc = vec![0.0; images[0].samples().len()];
    for (img, &wi) in images.iter().zip(w) {
        for (a, v) in acc.iter_mut().zip(img.samples()) {
            *a += wi * v;
        }
    }
    Image::new(width, height, acc).expect("convex combination of valid images")
}
