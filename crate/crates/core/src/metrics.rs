//! Confusion-matrix statistics, PSNR/SSIM, and the accuracy-per-second
//! efficiency ratio.

use serde::{Deserialize, Serialize};

use crate::classify::ProbabilityVector;
use crate::imaging::filter::{gaussian_taps, separable_field};
use crate::imaging::{to_luminance, Image};
use crate::synth::{DegradationKind, LabelSet, K};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("truth has {truth} entries, predictions {predicted}")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("row {0} is empty")]
    EmptyRow(usize),
    #[error("column {0} is empty")]
    EmptyColumn(usize),
    #[error("images differ in size: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {0}x{1}")]
    TooSmall(usize, usize),
    #[error("elapsed time must be positive, got {0}")]
    NonPositiveTime(f64),
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let classes = rows.len();
        assert!(rows.iter().all(|r| r.len() == classes), "confusion matrix must be square");
        Self { classes, counts: rows.concat() }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.classes).map(|j| self.get(i, j)).sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, j)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(|r| r.to_vec()).collect()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    let mut c = ConfusionMatrix::zeros(classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        if let Some(&index) = [t, p].iter().find(|&&i| i >= classes) {
            return Err(MetricsError::IndexOutOfRange { index, classes });
        }
        c.add(t, p);
    }
    Ok(c)
}

/// Trace over total.
pub fn accuracy(c: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let diag: u64 = (0..c.classes()).map(|i| c.get(i, i)).sum();
    Ok(diag as f64 / total as f64)
}

/// Diagonal entry over its row sum (recall of class `i`).
pub fn sensitivity(c: &ConfusionMatrix, i: usize) -> Result<f64, MetricsError> {
    check_index(c, i)?;
    let row = c.row_sum(i);
    if row == 0 {
        return Err(MetricsError::EmptyRow(i));
    }
    Ok(c.get(i, i) as f64 / row as f64)
}

/// Diagonal entry over its column sum (column-normalized specificity);
/// see [`conventional_specificity`] for the true-negative rate.
pub fn specificity(c: &ConfusionMatrix, j: usize) -> Result<f64, MetricsError> {
    check_index(c, j)?;
    let col = c.column_sum(j);
    if col == 0 {
        return Err(MetricsError::EmptyColumn(j));
    }
    Ok(c.get(j, j) as f64 / col as f64)
}

/// True negatives over all negatives of class `j`: `TN / (TN + FP)`.
pub fn conventional_specificity(c: &ConfusionMatrix, j: usize) -> Result<f64, MetricsError> {
    check_index(c, j)?;
    let negatives = c.total() - c.row_sum(j);
    if negatives == 0 {
        return Err(MetricsError::EmptyRow(j));
    }
    let false_pos = c.column_sum(j) - c.get(j, j);
    Ok((negatives - false_pos) as f64 / negatives as f64)
}

fn check_index(c: &ConfusionMatrix, i: usize) -> Result<(), MetricsError> {
    if i >= c.classes() {
        return Err(MetricsError::IndexOutOfRange { index: i, classes: c.classes() });
    }
    Ok(())
}

/// 2x2 matrix per class for multi-label outputs thresholded at `theta`:
/// row/column 0 is "absent", 1 is "present".
pub fn binarized_confusion(
    truth: &[LabelSet],
    probs: &[ProbabilityVector],
    theta: f64,
) -> Result<[ConfusionMatrix; K], MetricsError> {
    if truth.len() != probs.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), predicted: probs.len() });
    }
    let mut out: [ConfusionMatrix; K] = std::array::from_fn(|_| ConfusionMatrix::zeros(2));
    for (labels, p) in truth.iter().zip(probs) {
        for kind in DegradationKind::ALL {
            let t = labels.contains(&kind) as usize;
            let pr = (p.get(kind) >= theta) as usize;
            out[kind.index()].add(t, pr);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Psnr {
    Db(f64),
    /// The images are identical.
    Infinite,
}

impl Psnr {
    pub fn value(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v:.4}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

fn same_dims(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let n = a.samples().len() as f64;
    Ok(a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

pub fn psnr(a: &Image, b: &Image) -> Result<Psnr, MetricsError> {
    psnr_with_peak(a, b, 1.0)
}

pub fn psnr_with_peak(a: &Image, b: &Image, peak: f64) -> Result<Psnr, MetricsError> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { Psnr::Infinite } else { Psnr::Db(10.0 * (peak * peak / m).log10()) })
}

/// Mean SSIM of the luma planes with an 11x11 Gaussian window (sigma 1.5).
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(w, h));
    }
    let x = to_luminance(a).samples().to_vec();
    let y = to_luminance(b).samples().to_vec();
    let taps = gaussian_taps(SSIM_SIGMA, Some(SSIM_WINDOW / 2));
    let blur = |f: &[f64]| separable_field(f, w, h, &taps);
    let product = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
    let mx = blur(&x);
    let my = blur(&y);
    let sxx = blur(&product(&x, &x));
    let syy = blur(&product(&y, &y));
    let sxy = blur(&product(&x, &y));
    let c1 = 0.01f64.powi(2);
    let c2 = 0.03f64.powi(2);
    let total: f64 = (0..w * h)
        .map(|i| {
            let vx = sxx[i] - mx[i] * mx[i];
            let vy = syy[i] - my[i] * my[i];
            let cov = sxy[i] - mx[i] * my[i];
            ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2))
                / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / (w * h) as f64)
}

/// Accuracy per second of execution time.
pub fn efficiency(accuracy: f64, elapsed_secs: f64) -> Result<f64, MetricsError> {
    if !(elapsed_secs > 0.0) {
        return Err(MetricsError::NonPositiveTime(elapsed_secs));
    }
    Ok(accuracy / elapsed_secs)
}
