//! Fixed 16-slot degradation descriptor.
//!
//! | slot | name              | raw statistic                                          | map            |
//! |------|-------------------|--------------------------------------------------------|----------------|
//! | 0    | laplacian_var     | variance of the 4-neighbour Laplacian of luma          | `v/(v+0.02)`   |
//! | 1    | grad_p95          | 95th percentile of central-difference gradient norm    | `v/(v+0.1)`    |
//! | 2    | noise_sigma       | `median(|HH|)/0.6745` of the Haar diagonal band, RGB mean | `5v`        |
//! | 3    | residual_kurtosis | `m4/m2^2` of the Laplacian response                    | `v/(v+10)`     |
//! | 4    | dark_channel      | mean of 7x7 min-filtered per-pixel RGB minimum         | identity       |
//! | 5    | rms_contrast      | standard deviation of luma                             | `2v`           |
//! | 6    | anisotropy        | `sum gx^2 / (sum gx^2 + sum gy^2)`                     | identity       |
//! | 7    | streak_density    | fraction of vertically connected bright ridge pixels   | `25v`          |
//! | 8    | mean_luma         | mean luma                                              | identity       |
//! | 9    | luma_entropy      | 32-bin histogram entropy of luma                       | `/ log2(32)`   |
//! | 10   | shadow_fraction   | fraction of luma below 0.1                             | identity       |
//! | 11   | hf_ratio          | `mean((Y-U)^2)/var(Y)`, `U` = 2x box down, nearest up  | `v/(v+0.05)`   |
//! | 12   | width             | width / 1024                                           | clamp to [0,1] |
//! | 13   | height            | height / 1024                                          | clamp to [0,1] |
//! | 14   | saturation        | mean HSV saturation `(max-min)/max`                    | identity       |
//! | 15   | haze_gradient     | dark channel mean, top third minus bottom third        | `0.5 + 3v`, clamped |
//!
//! All constants are frozen so a trained model stays valid across corpora.

use serde::{Deserialize, Serialize};

use crate::imaging::filter::{convolve_field, min_filter_field};
use crate::imaging::{resize, Image, Kernel, ResizeMethod, CHANNELS};

pub const FEATURE_COUNT: usize = 16;
pub const MIN_SIDE: usize = 16;
pub const DARK_CHANNEL_WINDOW: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "laplacian_var",
    "grad_p95",
    "noise_sigma",
    "residual_kurtosis",
    "dark_channel",
    "rms_contrast",
    "anisotropy",
    "streak_density",
    "mean_luma",
    "luma_entropy",
    "shadow_fraction",
    "hf_ratio",
    "width",
    "height",
    "saturation",
    "haze_gradient",
];

const MAD_TO_SIGMA: f64 = 0.6745;
const ENTROPY_BINS: usize = 32;
const SHADOW_LEVEL: f64 = 0.1;
const RIDGE_CONTRAST: f64 = 0.06;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("image {width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}")]
pub struct TooSmall {
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn csv_header() -> String {
        FEATURE_NAMES.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.0.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Shifted by the first element so constant inputs give exactly zero.
fn variance(v: &[f64]) -> f64 {
    let shift = v[0];
    let n = v.len() as f64;
    let (s, s2) = v.iter().fold((0.0, 0.0), |(s, s2), x| {
        let d = x - shift;
        (s + d, s2 + d * d)
    });
    (s2 / n - (s / n) * (s / n)).max(0.0)
}

/// In-place order statistic at quantile `q` (nearest rank).
fn quantile(v: &mut [f64], q: f64) -> f64 {
    let k = ((v.len() - 1) as f64 * q).round() as usize;
    *v.select_nth_unstable_by(k, |a, b| a.total_cmp(b)).1
}

fn clamped(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Central differences with replicate edges.
fn gradients(y: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for r in 0..h {
        let up = clamped(r as isize - 1, h);
        let down = clamped(r as isize + 1, h);
        for c in 0..w {
            let left = clamped(c as isize - 1, w);
            let right = clamped(c as isize + 1, w);
            gx[r * w + c] = (y[r * w + right] - y[r * w + left]) / 2.0;
            gy[r * w + c] = (y[down * w + c] - y[up * w + c]) / 2.0;
        }
    }
    (gx, gy)
}

/// Robust noise level from the finest Haar diagonal subband of one channel.
pub fn haar_mad_sigma(plane: &[f64], w: usize, h: usize) -> f64 {
    let mut hh = Vec::with_capacity((w / 2) * (h / 2));
    for by in 0..h / 2 {
        for bx in 0..w / 2 {
            let at = |x: usize, y: usize| plane[y * w + x];
            let (x, y) = (2 * bx, 2 * by);
            hh.push(((at(x, y) - at(x + 1, y) - at(x, y + 1) + at(x + 1, y + 1)) / 2.0).abs());
        }
    }
    if hh.is_empty() {
        return 0.0;
    }
    quantile(&mut hh, 0.5) / MAD_TO_SIGMA
}

/// Noise estimate before normalization: mean over RGB of [`haar_mad_sigma`].
pub fn noise_sigma(image: &Image) -> f64 {
    let (w, h) = image.dims();
    image.planes().iter().map(|p| haar_mad_sigma(p.samples(), w, h)).sum::<f64>() / 3.0
}

/// Per-pixel RGB minimum followed by a square minimum filter.
pub fn dark_channel(image: &Image, window: usize) -> Vec<f64> {
    let (w, h) = image.dims();
    let mins: Vec<f64> = image.samples().chunks_exact(CHANNELS).map(|p| p[0].min(p[1]).min(p[2])).collect();
    min_filter_field(&mins, w, h, window)
}

fn streak_density(y: &[f64], w: usize, h: usize) -> f64 {
    let mut ridge = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            let l = y[r * w + clamped(c as isize - 2, w)];
            let rr = y[r * w + clamped(c as isize + 2, w)];
            ridge[r * w + c] = y[r * w + c] - l.max(rr) > RIDGE_CONTRAST;
        }
    }
    let near = |r: usize, c: usize| (c.saturating_sub(1)..=(c + 1).min(w - 1)).any(|cc| ridge[r * w + cc]);
    let mut count = 0usize;
    for r in 1..h.saturating_sub(1) {
        for c in 0..w {
            if ridge[r * w + c] && near(r - 1, c) && near(r + 1, c) {
                count += 1;
            }
        }
    }
    count as f64 / (w * h) as f64
}

fn entropy(y: &[f64]) -> f64 {
    let mut hist = [0usize; ENTROPY_BINS];
    for &v in y {
        let b = ((v * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1);
        hist[b] += 1;
    }
    let n = y.len() as f64;
    let e: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    e / (ENTROPY_BINS as f64).log2()
}

fn hf_ratio(y: &[f64], w: usize, h: usize) -> f64 {
    let (dw, dh) = ((w / 2).max(1), (h / 2).max(1));
    let mut down = vec![0.0; dw * dh];
    for r in 0..dh {
        for c in 0..dw {
            let mut s = 0.0;
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                s += y[(2 * r + dy).min(h - 1) * w + (2 * c + dx).min(w - 1)];
            }
            down[r * dw + c] = s / 4.0;
        }
    }
    let mut energy = 0.0;
    for r in 0..h {
        for c in 0..w {
            let u = down[(r / 2).min(dh - 1) * dw + (c / 2).min(dw - 1)];
            energy += (y[r * w + c] - u).powi(2);
        }
    }
    energy /= (w * h) as f64;
    let var = variance(y);
    if var <= 1e-12 {
        0.0
    } else {
        energy / var
    }
}

pub fn extract_features(image: &Image) -> Result<FeatureVector, TooSmall> {
    let (w, h) = image.dims();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(TooSmall { width: w, height: h });
    }
    let y = image.to_luminance();
    let y = y.samples();
    let mut f = [0.0; FEATURE_COUNT];

    let lap = convolve_field(y, w, h, &Kernel::laplacian());
    let lap_var = variance(&lap);
    f[0] = lap_var / (lap_var + 0.02);

    let (gx, gy) = gradients(y, w, h);
    let mut mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let p95 = quantile(&mut mag, 0.95);
    f[1] = p95 / (p95 + 0.1);

    f[2] = 5.0 * noise_sigma(image);

    let lap_mean = mean(&lap);
    let m2 = lap.iter().map(|v| (v - lap_mean).powi(2)).sum::<f64>() / lap.len() as f64;
    let m4 = lap.iter().map(|v| (v - lap_mean).powi(4)).sum::<f64>() / lap.len() as f64;
    let kurt = if m2 > 1e-18 { m4 / (m2 * m2) } else { 0.0 };
    f[3] = kurt / (kurt + 10.0);

    let dark = dark_channel(image, DARK_CHANNEL_WINDOW);
    f[4] = mean(&dark);

    f[5] = 2.0 * variance(y).sqrt();

    let ex: f64 = gx.iter().map(|v| v * v).sum();
    let ey: f64 = gy.iter().map(|v| v * v).sum();
    f[6] = if ex + ey > 0.0 { ex / (ex + ey) } else { 0.5 };

    f[7] = 25.0 * streak_density(y, w, h);
    f[8] = mean(y);
    f[9] = entropy(y);
    f[10] = y.iter().filter(|&&v| v < SHADOW_LEVEL).count() as f64 / y.len() as f64;

    let hf = hf_ratio(y, w, h);
    f[11] = hf / (hf + 0.05);

    f[12] = (w as f64 / 1024.0).min(1.0);
    f[13] = (h as f64 / 1024.0).min(1.0);

    f[14] = mean(
        &image
            .samples()
            .chunks_exact(CHANNELS)
            .map(|p| {
                let mx = p[0].max(p[1]).max(p[2]);
                let mn = p[0].min(p[1]).min(p[2]);
                if mx > 0.0 {
                    (mx - mn) / mx
                } else {
                    0.0
                }
            })
            .collect::<Vec<_>>(),
    );

    let third = (h / 3).max(1);
    let top = mean(&dark[..third * w]);
    let bottom = mean(&dark[(h - third) * w..]);
    f[15] = (0.5 + 3.0 * (top - bottom)).clamp(0.0, 1.0);

    Ok(FeatureVector(f))
}

/// Features as the classifier sees them: frames larger than `working` in
/// either dimension are first resized to exactly `working`.
pub fn extract_at_working_size(image: &Image, working: (usize, usize)) -> Result<FeatureVector, TooSmall> {
    let (w, h) = image.dims();
    if w > working.0 || h > working.1 {
        extract_features(&resize(image, working.0, working.1, ResizeMethod::Bicubic))
    } else {
        extract_features(image)
    }
}
