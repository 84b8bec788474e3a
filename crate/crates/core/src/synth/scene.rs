//! Deterministic structured test scenes: a two-colour gradient backdrop,
//! overlapping rectangles and discs, and low-amplitude smooth texture.
//! Used wherever a "clean photo" is needed without shipping real images.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::imaging::Image;
use crate::rng::seeded;

const TEXTURE_AMPLITUDE: f64 = 0.05;
const TEXTURE_CELL: usize = 6;

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    hsv(rng.random(), rng.random_range(0.55..1.0), rng.random_range(0.25..0.95))
}

enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Disc { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
        }
    }
}

/// Smooth value noise in `[-1, 1]`, bilinear between random lattice values.
fn value_noise(w: usize, h: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let gy = y as f64 / cell as f64;
        let (iy, fy) = (gy.floor() as usize, gy.fract());
        for x in 0..w {
            let gx = x as f64 / cell as f64;
            let (ix, fx) = (gx.floor() as usize, gx.fract());
            let g = |i: usize, j: usize| grid[j * gw + i];
            let top = g(ix, iy) * (1.0 - fx) + g(ix + 1, iy) * fx;
            let bot = g(ix, iy + 1) * (1.0 - fx) + g(ix + 1, iy + 1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

pub fn generate(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = seeded(seed);
    let (w, h) = (width.max(1), height.max(1));
    let (fw, fh) = (w as f64, h as f64);

    let c0 = random_color(&mut rng);
    let c1 = random_color(&mut rng);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gx, gy) = (angle.cos(), angle.sin());

    let n_shapes = rng.random_range(6..=11);
    let shapes: Vec<(Shape, [f64; 3])> = (0..n_shapes)
        .map(|_| {
            let color = random_color(&mut rng);
            let shape = if rng.random_bool(0.6) {
                let x0 = rng.random_range(-0.1..0.9) * fw;
                let y0 = rng.random_range(-0.1..0.9) * fh;
                let sw = rng.random_range(0.1..0.45) * fw;
                let sh = rng.random_range(0.1..0.45) * fh;
                Shape::Rect { x0, y0, x1: x0 + sw, y1: y0 + sh }
            } else {
                Shape::Disc {
                    cx: rng.random_range(0.0..1.0) * fw,
                    cy: rng.random_range(0.0..1.0) * fh,
                    r: rng.random_range(0.05..0.25) * fw.min(fh),
                }
            };
            (shape, color)
        })
        .collect();

    let texture = value_noise(w, h, TEXTURE_CELL, &mut rng);

    Image::from_fn(w, h, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let t = (((px / fw - 0.5) * gx + (py / fh - 0.5) * gy) + 0.5).clamp(0.0, 1.0);
        let mut c = [0, 1, 2].map(|i| c0[i] * (1.0 - t) + c1[i] * t);
        for (shape, color) in &shapes {
            if shape.contains(px, py) {
                c = *color;
            }
        }
        let n = TEXTURE_AMPLITUDE * texture[y * w + x];
        c.map(|v| v + n)
    })
    .expect("non-empty scene")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(generate(32, 24, 7), generate(32, 24, 7));
        assert_ne!(generate(32, 24, 7), generate(32, 24, 8));
    }

    #[test]
    fn has_structure() {
        let img = generate(64, 64, 1);
        let y = img.to_luminance();
        let mean = y.samples().iter().sum::<f64>() / 4096.0;
        let var = y.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4096.0;
        assert!(var > 1e-3);
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        let g = hsv(1.0 / 3.0, 1.0, 1.0);
        assert!((g[1] - 1.0).abs() < 1e-12 && g[0].abs() < 1e-12);
    }
}
