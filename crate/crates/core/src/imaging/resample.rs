use serde::{Deserialize, Serialize};

use super::{Image, CHANNELS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMethod {
    Nearest,
    Bicubic,
}

/// Keys cubic convolution kernel with a = -0.5.
#[inline]
fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// For each output coordinate: four replicate-clamped source indices and weights.
fn cubic_taps(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src_len as f64 / dst_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|d| {
            let s = (d as f64 + 0.5) * scale - 0.5;
            let base = s.floor();
            let t = s - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = (base + off).clamp(0, last) as usize;
                w[k] = cubic(t - off as f64);
            }
            (idx, w)
        })
        .collect()
}

fn nearest_index(d: usize, src_len: usize, dst_len: usize) -> usize {
    let s = ((d as f64 + 0.5) * src_len as f64 / dst_len as f64).floor() as usize;
    s.min(src_len - 1)
}

/// Resizes to exactly `new_width` x `new_height`. Zero target dimensions are
/// bumped to 1 so the function stays total.
pub fn resize(image: &Image, new_width: usize, new_height: usize, method: ResizeMethod) -> Image {
    let (nw, nh) = (new_width.max(1), new_height.max(1));
    if (nw, nh) == image.dims() {
        return image.clone();
    }
    match method {
        ResizeMethod::Nearest => resize_nearest(image, nw, nh),
        ResizeMethod::Bicubic => resize_bicubic(image, nw, nh),
    }
}

fn resize_nearest(image: &Image, nw: usize, nh: usize) -> Image {
    let (w, h) = image.dims();
    let xs: Vec<usize> = (0..nw).map(|x| nearest_index(x, w, nw)).collect();
    let src = image.samples();
    let mut out = Vec::with_capacity(nw * nh * CHANNELS);
    for y in 0..nh {
        let sy = nearest_index(y, h, nh);
        for &sx in &xs {
            let i = (sy * w + sx) * CHANNELS;
            out.extend_from_slice(&src[i..i + CHANNELS]);
        }
    }
    Image::from_raw(nw, nh, out)
}

fn resize_bicubic(image: &Image, nw: usize, nh: usize) -> Image {
    let (w, h) = image.dims();
    let src = image.samples();

    // horizontal pass: h rows of nw pixels
    let xt = cubic_taps(w, nw);
    let mut tmp = vec![0.0; h * nw * CHANNELS];
    for y in 0..h {
        let row = &src[y * w * CHANNELS..(y + 1) * w * CHANNELS];
        for (x, (idx, wt)) in xt.iter().enumerate() {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * row[idx[k] * CHANNELS + c];
                }
                tmp[(y * nw + x) * CHANNELS + c] = acc;
            }
        }
    }

    // vertical pass
    let yt = cubic_taps(h, nh);
    let stride = nw * CHANNELS;
    let mut out = vec![0.0; nh * stride];
    for (y, (idx, wt)) in yt.iter().enumerate() {
        let dst = &mut out[y * stride..(y + 1) * stride];
        for k in 0..4 {
            let srow = &tmp[idx[k] * stride..(idx[k] + 1) * stride];
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += wt[k] * s;
            }
        }
    }
    Image::from_raw(nw, nh, out)
}
