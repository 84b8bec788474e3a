//! Built-in classical restorers.

use serde::{Deserialize, Serialize};

use crate::imaging::filter::{gaussian_blur_field, min_filter_field};
use crate::imaging::{resize, Image, ResizeMethod, CHANNELS, LUMA_WEIGHTS};
use crate::synth::interleave;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BilateralParams {
    pub radius: usize,
    pub sigma_spatial: f64,
    pub sigma_range: f64,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self { radius: 2, sigma_spatial: 2.0, sigma_range: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DehazeParams {
    pub window: usize,
    pub omega: f64,
    pub t_min: f64,
    /// Fixed gray airlight; `None` estimates it from the image.
    pub airlight: Option<f64>,
    /// Fraction of brightest dark-channel pixels averaged for the estimate.
    pub airlight_fraction: f64,
}

impl DehazeParams {
    pub fn indoor() -> Self {
        Self { airlight: Some(0.85), ..Self::outdoor() }
    }

    pub fn outdoor() -> Self {
        Self { window: 7, omega: 0.9, t_min: 0.15, airlight: None, airlight_fraction: 0.001 }
    }
}

impl Default for DehazeParams {
    fn default() -> Self {
        Self::outdoor()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnsharpParams {
    pub sigma: f64,
    pub amount: f64,
}

impl Default for UnsharpParams {
    fn default() -> Self {
        Self { sigma: 1.5, amount: 0.8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerainParams {
    pub window: usize,
    /// Window directions in degrees from horizontal.
    pub angles: Vec<f64>,
    pub mix: f64,
}

impl Default for DerainParams {
    fn default() -> Self {
        Self { window: 9, angles: vec![0.0, 30.0, -30.0, 60.0, -60.0], mix: 0.7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceParams {
    pub gamma: f64,
    pub low_percentile: f64,
    pub high_percentile: f64,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self { gamma: 2.2, low_percentile: 0.01, high_percentile: 0.99 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpscaleParams {
    pub factor: usize,
    pub sharpen: UnsharpParams,
}

impl Default for UpscaleParams {
    fn default() -> Self {
        Self { factor: 2, sharpen: UnsharpParams { sigma: 1.0, amount: 0.5 } }
    }
}

fn channel_fields(img: &Image) -> [Vec<f64>; 3] {
    img.planes().map(|p| p.samples().to_vec())
}

/// Edge-preserving mean: spatial Gaussian times a range Gaussian on the
/// mean squared RGB difference to the centre pixel.
pub fn bilateral(img: &Image, p: &BilateralParams) -> Image {
    let (w, h) = img.dims();
    let s = img.samples();
    let r = p.radius as isize;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx * dx + dy * dy) as f64))
        .map(|d2| (-d2 / (2.0 * p.sigma_spatial * p.sigma_spatial)).exp())
        .collect();
    let inv_range = 1.0 / (2.0 * p.sigma_range * p.sigma_range);
    let mut out = Vec::with_capacity(s.len());
    for y in 0..h {
        for x in 0..w {
            let c = &s[(y * w + x) * CHANNELS..][..CHANNELS];
            let mut acc = [0.0; 3];
            let mut norm = 0.0;
            let mut k = 0;
            for dy in -r..=r {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let q = &s[(sy * w + sx) * CHANNELS..][..CHANNELS];
                    let d2 = ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2)) / 3.0;
                    let wgt = spatial[k] * (-d2 * inv_range).exp();
                    k += 1;
                    norm += wgt;
                    for ch in 0..3 {
                        acc[ch] += wgt * q[ch];
                    }
                }
            }
            out.extend(acc.map(|v| v / norm));
        }
    }
    Image::from_raw(w, h, out)
}

/// Mean colour of the brightest `fraction` of dark-channel pixels.
pub fn estimate_airlight(img: &Image, dark: &[f64], fraction: f64) -> [f64; 3] {
    let n = dark.len();
    let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.select_nth_unstable_by(n - take, |&a, &b| dark[a].total_cmp(&dark[b]).then(a.cmp(&b)));
    let mut a = [0.0; 3];
    for &i in &idx[n - take..] {
        let p = &img.samples()[i * CHANNELS..][..CHANNELS];
        for c in 0..3 {
            a[c] += p[c];
        }
    }
    a.map(|v| (v / take as f64).max(1e-3))
}

/// Dark-channel-prior haze removal without transmission refinement.
pub fn dehaze(img: &Image, p: &DehazeParams) -> Image {
    let (w, h) = img.dims();
    let mins: Vec<f64> = img.samples().chunks_exact(CHANNELS).map(|q| q[0].min(q[1]).min(q[2])).collect();
    let airlight = match p.airlight {
        Some(a) => [a; 3],
        None => estimate_airlight(img, &min_filter_field(&mins, w, h, p.window), p.airlight_fraction),
    };
    let normalized: Vec<f64> = img
        .samples()
        .chunks_exact(CHANNELS)
        .map(|q| (0..3).map(|c| q[c] / airlight[c]).fold(f64::INFINITY, f64::min))
        .collect();
    let dark = min_filter_field(&normalized, w, h, p.window);
    let out = img
        .samples()
        .chunks_exact(CHANNELS)
        .zip(&dark)
        .flat_map(|(q, d)| {
            let t = (1.0 - p.omega * d).max(p.t_min);
            [0, 1, 2].map(|c| (q[c] - airlight[c]) / t + airlight[c])
        })
        .collect();
    Image::from_raw(w, h, out)
}

/// `x + amount * (x - G_sigma * x)`, clamped.
pub fn unsharp(img: &Image, p: &UnsharpParams) -> Image {
    let (w, h) = img.dims();
    let planes = channel_fields(img).map(|f| {
        let blur = gaussian_blur_field(&f, w, h, p.sigma);
        f.iter().zip(&blur).map(|(x, b)| x + p.amount * (x - b)).collect()
    });
    interleave(w, h, &planes)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Bright thin streaks vanish from medians over short lines that cross
/// them; the minimum over several crossing directions is taken per pixel
/// and mixed with the input.
pub fn derain(img: &Image, p: &DerainParams) -> Image {
    let (w, h) = img.dims();
    let half = (p.window.max(1) / 2) as isize;
    let offsets: Vec<Vec<(isize, isize)>> = p
        .angles
        .iter()
        .map(|deg| {
            let (sin, cos) = deg.to_radians().sin_cos();
            (-half..=half).map(|i| ((i as f64 * cos).round() as isize, (i as f64 * sin).round() as isize)).collect()
        })
        .collect();
    if offsets.is_empty() {
        return img.clone();
    }
    let planes = channel_fields(img).map(|f| {
        let mut buf = Vec::with_capacity(p.window);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut best = f64::INFINITY;
                for line in &offsets {
                    buf.clear();
                    buf.extend(line.iter().map(|&(dx, dy)| {
                        let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let sy = (y as isize - dy).clamp(0, h as isize - 1) as usize;
                        f[sy * w + sx]
                    }));
                    best = best.min(median_in_place(&mut buf));
                }
                let v = f[y * w + x];
                out[y * w + x] = p.mix * best + (1.0 - p.mix) * v;
            }
        }
        out
    });
    interleave(w, h, &planes)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    sorted[i]
}

/// Gamma lift followed by a linear stretch mapping the luma percentiles
/// `[low, high]` onto `[0, 1]`.
pub fn enhance(img: &Image, p: &EnhanceParams) -> Image {
    let lifted = img.map(|v| v.powf(1.0 / p.gamma));
    let mut luma: Vec<f64> = lifted
        .samples()
        .chunks_exact(CHANNELS)
        .map(|q| LUMA_WEIGHTS[0] * q[0] + LUMA_WEIGHTS[1] * q[1] + LUMA_WEIGHTS[2] * q[2])
        .collect();
    luma.sort_by(f64::total_cmp);
    let lo = percentile(&luma, p.low_percentile);
    let hi = percentile(&luma, p.high_percentile);
    if hi - lo < 1e-6 {
        return lifted;
    }
    lifted.map(|v| (v - lo) / (hi - lo))
}

/// Bicubic upscale followed by a mild unsharp mask.
pub fn upscale(img: &Image, p: &UpscaleParams) -> Image {
    let (w, h) = img.dims();
    let big = resize(img, w * p.factor, h * p.factor, ResizeMethod::Bicubic);
    unsharp(&big, &p.sharpen)
}
