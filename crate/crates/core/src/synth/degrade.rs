//! Per-kind degradation synthesis. Deterministic in
//! `(clean, kind, severity, seed)`; severity 0 is the identity.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DegradationKind;
use crate::imaging::filter::convolve_field;
use crate::imaging::{Image, Kernel, CHANNELS};
use crate::rng::{mix, seeded};

/// Noise standard deviation at severity 1, in `[0, 1]` units.
pub const NOISE_SIGMA_MAX: f64 = 0.12;
/// Longest motion-blur trail, reached at severity 1 (plus the base pixel).
pub const BLUR_MAX_EXTRA_LENGTH: f64 = 14.0;
pub const HAZE_INDOOR_AIRLIGHT: [f64; 3] = [0.85, 0.85, 0.85];
pub const HAZE_INDOOR_DENSITY: f64 = 0.7;
pub const HAZE_OUTDOOR_AIRLIGHT: [f64; 3] = [0.92, 0.95, 0.99];
pub const HAZE_OUTDOOR_DENSITY: f64 = 0.9;
/// Outdoor transmission loss shrinks linearly by this fraction from top to bottom row.
pub const HAZE_OUTDOOR_FALLOFF: f64 = 0.4;
pub const RAIN_INTENSITY: f64 = 0.6;
/// Fraction of pixels covered by streaks at severity 1.
pub const RAIN_DENSITY: f64 = 0.02;
pub const RAIN_LENGTH: (usize, usize) = (8, 24);
pub const RAIN_ANGLE_DEG: (f64, f64) = (70.0, 110.0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegradeOptions {
    /// Nearest-upsample super-resolution inputs back to the source size.
    #[serde(default)]
    pub sr_upsample: bool,
}

pub fn apply_degradation(clean: &Image, kind: DegradationKind, severity: f64, seed: u64) -> Image {
    apply_degradation_with(clean, kind, severity, seed, DegradeOptions::default())
}

/// Severity is clamped to `[0, 1]`; NaN counts as 0.
pub fn apply_degradation_with(
    clean: &Image,
    kind: DegradationKind,
    severity: f64,
    seed: u64,
    opts: DegradeOptions,
) -> Image {
    let s = if severity.is_nan() { 0.0 } else { severity.clamp(0.0, 1.0) };
    if s == 0.0 {
        return clean.clone();
    }
    let seed = mix(seed, kind.index() as u64);
    match kind {
        DegradationKind::Denoising => add_noise(clean, s * NOISE_SIGMA_MAX, seed),
        DegradationKind::DehazingIndoor => haze(clean, HAZE_INDOOR_AIRLIGHT, s * HAZE_INDOOR_DENSITY, 0.0),
        DegradationKind::DehazingOutdoor => {
            haze(clean, HAZE_OUTDOOR_AIRLIGHT, s * HAZE_OUTDOOR_DENSITY, HAZE_OUTDOOR_FALLOFF)
        }
        DegradationKind::Deblurring => {
            let length = 1 + (s * BLUR_MAX_EXTRA_LENGTH).round() as usize;
            let angle = seeded(seed).random_range(0.0..PI);
            motion_blur(clean, length, angle)
        }
        DegradationKind::Deraining => rain(clean, s, seed),
        DegradationKind::Enhancement => darken(clean, s),
        DegradationKind::SuperResolution => {
            let half = downsample_box2(clean);
            if opts.sr_upsample {
                crate::imaging::resize(&half, clean.width(), clean.height(), crate::imaging::ResizeMethod::Nearest)
            } else {
                half
            }
        }
    }
}

fn add_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    img.map(|v| v + normal.sample(&mut rng))
}

/// `I = J t + A (1 - t)` with `t = 1 - loss * g(y)`, `g` falling linearly
/// from 1 at the top row to `1 - falloff` at the bottom.
fn haze(img: &Image, airlight: [f64; 3], loss: f64, falloff: f64) -> Image {
    let h = img.height();
    img.map_pixels(|_, y, p| {
        let g = if h > 1 { 1.0 - falloff * y as f64 / (h - 1) as f64 } else { 1.0 };
        let t = 1.0 - loss * g;
        [0, 1, 2].map(|c| p[c] * t + airlight[c] * (1.0 - t))
    })
}

/// Normalized line kernel of `length` taps at `angle` radians, splatted bilinearly.
pub fn motion_kernel(length: usize, angle: f64) -> Kernel {
    if length <= 1 {
        return Kernel::identity();
    }
    let half = (length - 1) as f64 / 2.0;
    let r = half.ceil() as usize + 1;
    let size = 2 * r + 1;
    let mut w = vec![0.0; size * size];
    let (dx, dy) = (angle.cos(), angle.sin());
    for i in 0..length {
        let t = i as f64 - half;
        let (px, py) = (r as f64 + t * dx, r as f64 + t * dy);
        let (x0, y0) = (px.floor(), py.floor());
        let (fx, fy) = (px - x0, py - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        for (ox, oy, wt) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let (x, y) = (x0 + ox, y0 + oy);
            if x < size && y < size {
                w[y * size + x] += wt;
            }
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Kernel::new(size, size, w).expect("odd kernel")
}

pub(crate) fn convolve_image(img: &Image, kernel: &Kernel) -> Image {
    let (w, h) = img.dims();
    let planes = img
        .planes()
        .map(|p| convolve_field(p.samples(), w, h, kernel));
    interleave(w, h, &planes)
}

pub(crate) fn interleave(w: usize, h: usize, planes: &[Vec<f64>; 3]) -> Image {
    let mut out = Vec::with_capacity(w * h * CHANNELS);
    for i in 0..w * h {
        out.extend([planes[0][i], planes[1][i], planes[2][i]]);
    }
    Image::from_raw(w, h, out)
}

fn motion_blur(img: &Image, length: usize, angle: f64) -> Image {
    convolve_image(img, &motion_kernel(length, angle))
}

/// Number of rain streaks drawn on a `w`x`h` frame at severity `s`.
pub fn rain_streak_count(w: usize, h: usize, s: f64) -> usize {
    let mean_len = (RAIN_LENGTH.0 + RAIN_LENGTH.1) as f64 / 2.0;
    (s * RAIN_DENSITY * (w * h) as f64 / mean_len).round().max(1.0) as usize
}

fn rain(img: &Image, s: f64, seed: u64) -> Image {
    let (w, h) = img.dims();
    let mut rng = seeded(seed);
    let mut add = vec![0.0; w * h];
    let intensity = s * RAIN_INTENSITY;
    for _ in 0..rain_streak_count(w, h, s) {
        let x0 = rng.random_range(0.0..w as f64);
        let y0 = rng.random_range(0.0..h as f64);
        let len = rng.random_range(RAIN_LENGTH.0..=RAIN_LENGTH.1);
        let ang = rng.random_range(RAIN_ANGLE_DEG.0..=RAIN_ANGLE_DEG.1).to_radians();
        let (dx, dy) = (ang.cos(), ang.sin());
        let mut last = usize::MAX;
        for i in 0..len {
            let x = (x0 + i as f64 * dx).round();
            let y = (y0 + i as f64 * dy).round();
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                continue;
            }
            let idx = y as usize * w + x as usize;
            if idx != last {
                add[idx] += intensity;
                last = idx;
            }
        }
    }
    let mut out = img.samples().to_vec();
    for (i, a) in add.iter().enumerate() {
        for c in 0..CHANNELS {
            out[i * CHANNELS + c] += a;
        }
    }
    Image::from_raw(w, h, out)
}

/// Gamma darkening `v^(1 + 3s)` followed by contrast scaling `(1 - s/2)`
/// about the darkened mean.
fn darken(img: &Image, s: f64) -> Image {
    let gamma = 1.0 + 3.0 * s;
    let dark = img.map(|v| v.powf(gamma));
    let mean = dark.samples().iter().sum::<f64>() / dark.samples().len() as f64;
    let k = 1.0 - 0.5 * s;
    dark.map(|v| mean + (v - mean) * k)
}

/// 2x2 box average; odd trailing rows/columns are dropped.
pub fn downsample_box2(img: &Image) -> Image {
    let (w, h) = img.dims();
    let (nw, nh) = ((w / 2).max(1), (h / 2).max(1));
    if w < 2 || h < 2 {
        return crate::imaging::resize(img, nw, nh, crate::imaging::ResizeMethod::Nearest);
    }
    let src = img.samples();
    let mut out = Vec::with_capacity(nw * nh * CHANNELS);
    for y in 0..nh {
        for x in 0..nw {
            for c in 0..CHANNELS {
                let at = |xx: usize, yy: usize| src[(yy * w + xx) * CHANNELS + c];
                let sum = at(2 * x, 2 * y) + at(2 * x + 1, 2 * y) + at(2 * x, 2 * y + 1) + at(2 * x + 1, 2 * y + 1);
                out.push(sum / 4.0);
            }
        }
    }
    Image::from_raw(nw, nh, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::scene;

    #[test]
    fn severity_zero_is_identity() {
        let img = scene::generate(40, 30, 3);
        for k in DegradationKind::ALL {
            assert_eq!(apply_degradation(&img, k, 0.0, 99), img);
        }
    }

    #[test]
    fn deterministic() {
        let img = scene::generate(48, 48, 1);
        for k in DegradationKind::ALL {
            let a = apply_degradation(&img, k, 0.7, 5);
            let b = apply_degradation(&img, k, 0.7, 5);
            assert_eq!(a, b, "{k}");
        }
    }

    #[test]
    fn noise_std_matches_sigma() {
        let img = Image::filled(128, 128, [0.5; 3]).unwrap();
        let out = apply_degradation(&img, DegradationKind::Denoising, 0.5, 11);
        let target = 0.5 * NOISE_SIGMA_MAX;
        for c in 0..3 {
            let ch = out.channel(c);
            let n = ch.samples().len() as f64;
            let mean = ch.samples().iter().sum::<f64>() / n;
            let var = ch.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            assert!((sd - target).abs() <= 0.15 * target, "channel {c}: std {sd} vs {target}");
        }
    }

    #[test]
    fn dimensions_preserved_except_super_resolution() {
        let img = scene::generate(33, 21, 4);
        for k in DegradationKind::ALL {
            let out = apply_degradation(&img, k, 0.6, 2);
            let expect = if k == DegradationKind::SuperResolution { (16, 10) } else { (33, 21) };
            assert_eq!(out.dims(), expect, "{k}");
        }
        let up = apply_degradation_with(&img, DegradationKind::SuperResolution, 0.6, 2, DegradeOptions { sr_upsample: true });
        assert_eq!(up.dims(), (33, 21));
    }

    #[test]
    fn motion_kernel_is_normalized_and_odd() {
        for len in 1..16 {
            for a in [0.0, 0.3, 1.2, 2.9] {
                let k = motion_kernel(len, a);
                assert!(k.width() % 2 == 1);
                assert!((k.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outdoor_haze_is_denser_at_top() {
        let img = Image::filled(16, 32, [0.1; 3]).unwrap();
        let out = apply_degradation(&img, DegradationKind::DehazingOutdoor, 0.8, 0);
        assert!(out.pixel(0, 0)[0] > out.pixel(0, 31)[0]);
        let indoor = apply_degradation(&img, DegradationKind::DehazingIndoor, 0.8, 0);
        assert_eq!(indoor.pixel(0, 0), indoor.pixel(0, 31));
    }

    #[test]
    fn rain_only_brightens() {
        let img = scene::generate(64, 64, 8);
        let out = apply_degradation(&img, DegradationKind::Deraining, 0.8, 3);
        let brighter = img.samples().iter().zip(out.samples()).filter(|(a, b)| b > a).count();
        assert!(brighter > 0);
        assert!(img.samples().iter().zip(out.samples()).all(|(a, b)| b >= a));
    }
}
