//! Float RGB rasters and the primitives shared by every stage of the pipeline.
//!
//! Samples live in `[0, 1]` as `f64`; 8-bit quantization only happens in the
//! codecs. Every constructor clamps on write, so an [`Image`] or [`Plane`] in
//! hand always satisfies the range invariant.

mod codec;
pub mod filter;
mod resample;

pub use codec::{decode, encode_png, encode_ppm, load_image, save_image, Format};
pub use filter::{convolve, Kernel};
pub use resample::{resize, ResizeMethod};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image data: {0}")]
    CorruptData(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("expected {expected} samples, got {actual}")]
    SampleCount { expected: usize, actual: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("kernel dimensions must be odd, got {width}x{height}")]
    EvenKernel { width: usize, height: usize },
}

pub type Result<T, E = ImageError> = std::result::Result<T, E>;

/// Number of interleaved channels in an [`Image`]. Only RGB is supported.
pub const CHANNELS: usize = 3;

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    Ok(())
}

fn check_samples(samples: &[f64], expected: usize) -> Result<()> {
    if samples.len() != expected {
        return Err(ImageError::SampleCount { expected, actual: samples.len() });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(ImageError::NonFinite(i));
    }
    Ok(())
}

/// Row-major interleaved RGB raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl Image {
    /// Wraps interleaved RGB samples. Finite values are clamped to `[0, 1]`.
    pub fn new(width: usize, height: usize, mut samples: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        check_samples(&samples, width * height * CHANNELS)?;
        samples.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(Self { width, height, samples })
    }

    /// Internal constructor for buffers that are already the right length.
    /// Clamps and scrubs NaN so operations can write without checking.
    pub(crate) fn from_raw(width: usize, height: usize, mut samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height * CHANNELS);
        debug_assert!(width > 0 && height > 0);
        samples.iter_mut().for_each(|v| *v = clamp01(*v));
        Self { width, height, samples }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let samples = (0..width * height).flat_map(|_| rgb).collect();
        Ok(Self::from_raw(width, height, samples))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut samples = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                samples.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self::from_raw(width, height, samples))
    }

    /// Interleaves three equally sized planes into an image.
    pub fn from_planes(planes: &[Plane; 3]) -> Result<Self> {
        let (w, h) = planes[0].dims();
        if planes.iter().any(|p| p.dims() != (w, h)) {
            return Err(ImageError::CorruptData("channel planes differ in size".into()));
        }
        let mut samples = Vec::with_capacity(w * h * CHANNELS);
        for i in 0..w * h {
            for p in planes {
                samples.push(p.samples[i]);
            }
        }
        Ok(Self::from_raw(w, h, samples))
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
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    /// Applies `f` to every sample, clamping the result.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let samples = self.samples.iter().map(|&v| f(v)).collect();
        Self::from_raw(self.width, self.height, samples)
    }

    /// Applies `f` to every pixel, clamping the result.
    pub fn map_pixels(&self, mut f: impl FnMut(usize, usize, [f64; 3]) -> [f64; 3]) -> Self {
        let mut samples = Vec::with_capacity(self.samples.len());
        for y in 0..self.height {
            for x in 0..self.width {
                samples.extend_from_slice(&f(x, y, self.pixel(x, y)));
            }
        }
        Self::from_raw(self.width, self.height, samples)
    }

    pub fn channel(&self, c: usize) -> Plane {
        assert!(c < CHANNELS, "channel index {c} out of range");
        let samples = self.samples.iter().skip(c).step_by(CHANNELS).copied().collect();
        Plane { width: self.width, height: self.height, samples }
    }

    pub fn planes(&self) -> [Plane; 3] {
        [self.channel(0), self.channel(1), self.channel(2)]
    }

    /// Quarter turn counter-clockwise: output `(x, y)` reads input `(W-1-y, x)`.
    pub fn rot90(&self) -> Self {
        let (w, h) = self.dims();
        Self::from_fn(h, w, |x, y| self.pixel(w - 1 - y, x)).expect("non-empty image")
    }

    /// Per-pixel Rec. 601 luma.
    pub fn to_luminance(&self) -> Plane {
        let samples = self
            .samples
            .chunks_exact(CHANNELS)
            .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
            .map(clamp01)
            .collect();
        Plane { width: self.width, height: self.height, samples }
    }
}

/// Free-function alias for [`Image::to_luminance`].
pub fn to_luminance(image: &Image) -> Plane {
    image.to_luminance()
}

/// Single-channel raster with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, mut samples: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        check_samples(&samples, width * height)?;
        samples.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(Self { width, height, samples })
    }

    pub(crate) fn from_raw(width: usize, height: usize, mut samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        samples.iter_mut().for_each(|v| *v = clamp01(*v));
        Self { width, height, samples }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self::from_raw(width, height, vec![value; width * height]))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Ok(Self::from_raw(width, height, samples))
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
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn rot90(&self) -> Self {
        let (w, h) = self.dims();
        Self::from_fn(h, w, |x, y| self.get(w - 1 - y, x)).expect("non-empty plane")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luminance_of_primaries() {
        let white = Image::filled(4, 4, [1.0; 3]).unwrap();
        assert!(white.to_luminance().samples().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let red = Image::filled(2, 2, [1.0, 0.0, 0.0]).unwrap();
        assert!(red.to_luminance().samples().iter().all(|&v| (v - 0.299).abs() < 1e-12));
        for g in [0.0, 0.25, 0.5, 0.9] {
            let gray = Image::filled(3, 2, [g; 3]).unwrap();
            assert!(gray.to_luminance().samples().iter().all(|&v| (v - g).abs() < 1e-12));
        }
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(Image::new(0, 3, vec![]), Err(ImageError::InvalidDimensions { .. })));
        assert!(matches!(Image::new(1, 1, vec![0.0; 2]), Err(ImageError::SampleCount { .. })));
        assert!(matches!(Image::new(1, 1, vec![0.0, f64::NAN, 0.0]), Err(ImageError::NonFinite(1))));
        let img = Image::new(1, 1, vec![-0.5, 0.5, 7.0]).unwrap();
        assert_eq!(img.samples(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn rot90_four_times_is_identity() {
        let img = Image::from_fn(5, 3, |x, y| [x as f64 / 4.0, y as f64 / 2.0, 0.3]).unwrap();
        let r = img.rot90();
        assert_eq!(r.dims(), (3, 5));
        assert_eq!(r.rot90().rot90().rot90(), img);
    }

    #[test]
    fn planes_round_trip() {
        let img = Image::from_fn(4, 3, |x, y| [x as f64 / 3.0, y as f64 / 2.0, 0.7]).unwrap();
        assert_eq!(Image::from_planes(&img.planes()).unwrap(), img);
    }
}
