//! Procedural stand-ins for photographs: a two-color gradient, a handful of
//! filled shapes, and mild per-pixel noise.

use rand::Rng;

use crate::raster::{round_u8, RasterImage};
use crate::seed;

/// Range of side lengths for generated frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeRange {
    pub min: u32,
    pub max: u32,
}

impl SizeRange {
    /// Sizes around the normalized frame, so that cropping, padding and both
    /// scaling directions all occur.
    pub const FRAME: SizeRange = SizeRange { min: 384, max: 768 };
    /// Small frames for face-crop subtasks.
    pub const FACE: SizeRange = SizeRange { min: 52, max: 160 };
}

pub fn synthetic_image(seed: u64, sizes: SizeRange) -> RasterImage {
    let mut rng = seed::rng(seed::derive(seed, "synthetic-image", &[]));
    let w = rng.random_range(sizes.min..=sizes.max);
    let h = rng.random_range(sizes.min..=sizes.max);
    let c0: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let span = (f64::from(w) * dx.abs() + f64::from(h) * dy.abs()).max(1.0);

    let mut img = RasterImage::from_fn(w, h, |x, y| {
        let proj = (f64::from(x) - f64::from(w) / 2.0) * dx + (f64::from(y) - f64::from(h) / 2.0) * dy;
        let s = (proj / span + 0.5).clamp(0.0, 1.0);
        std::array::from_fn(|c| round_u8(c0[c] * (1.0 - s) + c1[c] * s))
    });

    let shapes = rng.random_range(3..=8);
    for _ in 0..shapes {
        let color: [u8; 3] = std::array::from_fn(|_| rng.random());
        let cx = rng.random_range(0..w) as f64;
        let cy = rng.random_range(0..h) as f64;
        let rx = rng.random_range(w / 16 + 1..=w / 3 + 1) as f64;
        let ry = rng.random_range(h / 16 + 1..=h / 3 + 1) as f64;
        let ellipse = rng.random_bool(0.5);
        let x0 = (cx - rx).max(0.0) as u32;
        let x1 = ((cx + rx) as u32).min(w - 1);
        let y0 = (cy - ry).max(0.0) as u32;
        let y1 = ((cy + ry) as u32).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (u, v) = ((f64::from(x) - cx) / rx, (f64::from(y) - cy) / ry);
                if !ellipse || u * u + v * v <= 1.0 {
                    img.set_pixel(x, y, color);
                }
            }
        }
    }

    for v in img.data_mut() {
        let jitter: i16 = rng.random_range(-6..=6);
        *v = (i16::from(*v) + jitter).clamp(0, 255) as u8;
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = synthetic_image(1, SizeRange::FACE);
        assert_eq!(a, synthetic_image(1, SizeRange::FACE));
        assert_ne!(a, synthetic_image(2, SizeRange::FACE));
    }

    #[test]
    fn respects_size_range() {
        for s in 0..20 {
            let img = synthetic_image(s, SizeRange { min: 40, max: 60 });
            assert!((40..=60).contains(&img.width()));
            assert!((40..=60).contains(&img.height()));
        }
    }
}
