//! Spatial filtering with replicate-edge padding.
//!
//! The public [`convolve`] honours the plane range invariant and clamps its
//! output. The `*_field` helpers work on raw `f64` buffers and keep signed
//! responses, which the feature extractor and restorers need.

use super::{ImageError, Plane, Result};

/// Odd-sized 2-D stencil, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(ImageError::EvenKernel { width, height });
        }
        if weights.len() != width * height {
            return Err(ImageError::SampleCount { expected: width * height, actual: weights.len() });
        }
        Ok(Self { width, height, weights })
    }

    pub fn identity() -> Self {
        Self { width: 1, height: 1, weights: vec![1.0] }
    }

    pub fn box_filter(size: usize) -> Result<Self> {
        let n = (size * size) as f64;
        Self::new(size, size, vec![1.0 / n; size * size])
    }

    /// 4-neighbour Laplacian.
    pub fn laplacian() -> Self {
        Self {
            width: 3,
            height: 3,
            weights: vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Same-size 2-D convolution of a plane, replicate padding, clamped output.
pub fn convolve(plane: &Plane, kernel: &Kernel) -> Result<Plane> {
    let (w, h) = plane.dims();
    let out = convolve_field(plane.samples(), w, h, kernel);
    Ok(Plane::from_raw(w, h, out))
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Unclamped same-size convolution of a `w`x`h` buffer.
pub fn convolve_field(src: &[f64], w: usize, h: usize, kernel: &Kernel) -> Vec<f64> {
    debug_assert_eq!(src.len(), w * h);
    let (kw, kh) = (kernel.width as isize, kernel.height as isize);
    let (rx, ry) = (kw / 2, kh / 2);
    // true convolution: the kernel is flipped relative to the offsets
    let taps: Vec<(isize, isize, f64)> = (0..kh)
        .flat_map(|j| (0..kw).map(move |i| (i, j)))
        .map(|(i, j)| (rx - i, ry - j, kernel.weights[(j * kw + i) as usize]))
        .filter(|&(_, _, wt)| wt != 0.0)
        .collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for &(dx, dy, wt) in &taps {
                let sx = clamp_index(x as isize + dx, w);
                let sy = clamp_index(y as isize + dy, h);
                acc += wt * src[sy * w + sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Separable convolution with the same symmetric 1-D kernel along both axes.
pub fn separable_field(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    debug_assert!(taps.len() % 2 == 1);
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * row[clamp_index(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for (k, &t) in taps.iter().enumerate() {
        for y in 0..h {
            let sy = clamp_index(y as isize + k as isize - r, h);
            let (dst, srow) = (&mut out[y * w..(y + 1) * w], &tmp[sy * w..(sy + 1) * w]);
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += t * s;
            }
        }
    }
    out
}

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)` unless given.
pub fn gaussian_taps(sigma: f64, radius: Option<usize>) -> Vec<f64> {
    let r = radius.unwrap_or_else(|| (3.0 * sigma).ceil().max(1.0) as usize) as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

pub fn gaussian_blur_field(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    separable_field(src, w, h, &gaussian_taps(sigma, None))
}

/// Square `size`x`size` minimum filter (grey erosion), replicate padding.
pub fn min_filter_field(src: &[f64], w: usize, h: usize, size: usize) -> Vec<f64> {
    let r = (size / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut m = f64::INFINITY;
            for d in -r..=r {
                m = m.min(row[clamp_index(x as isize + d, w)]);
            }
            tmp[y * w + x] = m;
        }
    }
    let mut out = vec![f64::INFINITY; w * h];
    for d in -r..=r {
        for y in 0..h {
            let sy = clamp_index(y as isize + d, h);
            let (dst, srow) = (&mut out[y * w..(y + 1) * w], &tmp[sy * w..(sy + 1) * w]);
            for (o, s) in dst.iter_mut().zip(srow) {
                *o = o.min(*s);
            }
        }
    }
    out
}
