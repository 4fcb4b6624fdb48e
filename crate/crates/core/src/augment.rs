//! Byte-level image augmentations, normalization, and six-channel sample
//! assembly for the training recipes.
//!
//! Each active op fires independently with probability `p`; ops run in a
//! fixed order. Every op draws from its own stream derived from the call
//! seed, so whether one op fires never shifts another's randomness.

use std::fmt;
use std::str::FromStr;

use image::codecs::jpeg::JpegEncoder;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bfv;
use crate::dataset::{Label, Subtask};
use crate::error::{Error, Result};
use crate::raster::{round_u8, RasterImage, CHANNELS};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentOp {
    ShiftScaleRotate,
    HorizontalFlip,
    RandomBrightnessContrast,
    MotionBlur,
    GaussNoise,
    ToGray,
    ImageCompression,
    MultiplicativeNoise,
    CoarseDropout,
}

impl AugmentOp {
    /// All ops in application order.
    pub const ALL: [AugmentOp; 9] = [
        AugmentOp::ShiftScaleRotate,
        AugmentOp::HorizontalFlip,
        AugmentOp::RandomBrightnessContrast,
        AugmentOp::MotionBlur,
        AugmentOp::GaussNoise,
        AugmentOp::ToGray,
        AugmentOp::ImageCompression,
        AugmentOp::MultiplicativeNoise,
        AugmentOp::CoarseDropout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentOp::ShiftScaleRotate => "shift-scale-rotate",
            AugmentOp::HorizontalFlip => "horizontal-flip",
            AugmentOp::RandomBrightnessContrast => "random-brightness-contrast",
            AugmentOp::MotionBlur => "motion-blur",
            AugmentOp::GaussNoise => "gauss-noise",
            AugmentOp::ToGray => "to-gray",
            AugmentOp::ImageCompression => "image-compression",
            AugmentOp::MultiplicativeNoise => "multiplicative-noise",
            AugmentOp::CoarseDropout => "coarse-dropout",
        }
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which ops are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OpSet {
    /// The first seven ops.
    #[default]
    Standard,
    /// All nine, adding multiplicative noise and coarse dropout.
    Extended,
}

impl OpSet {
    pub fn ops(self) -> &'static [AugmentOp] {
        match self {
            OpSet::Standard => &AugmentOp::ALL[..7],
            OpSet::Extended => &AugmentOp::ALL,
        }
    }
}

impl FromStr for OpSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(OpSet::Standard),
            "extended" => Ok(OpSet::Extended),
            _ => Err(Error::InvalidParameter(format!("op set must be standard or extended, got `{s}`"))),
        }
    }
}

/// Per-channel normalization constants applied to `x / 255`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            mean: [0.5; 3],
            std: [0.5; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Firing probability of each active op.
    pub probability: f64,
    pub ops: OpSet,
    /// Maximum shift as a fraction of the side.
    pub shift_limit: f64,
    pub scale_range: (f64, f64),
    pub rotate_limit_deg: f64,
    pub brightness_limit: f64,
    pub contrast_limit: f64,
    /// Odd kernel sizes.
    pub blur_kernel: (u32, u32),
    /// Variance range of the additive noise, in 8-bit units squared.
    pub noise_var: (f64, f64),
    pub jpeg_quality: (u8, u8),
    pub multiplier_range: (f64, f64),
    pub dropout_max_holes: u32,
    pub dropout_max_size: u32,
    pub normalization: Normalization,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            probability: 0.1,
            ops: OpSet::Standard,
            shift_limit: 0.0625,
            scale_range: (0.9, 1.1),
            rotate_limit_deg: 45.0,
            brightness_limit: 0.2,
            contrast_limit: 0.2,
            blur_kernel: (3, 7),
            noise_var: (10.0, 50.0),
            jpeg_quality: (60, 100),
            multiplier_range: (0.9, 1.1),
            dropout_max_holes: 8,
            dropout_max_size: 8,
            normalization: Normalization::default(),
        }
    }
}

fn ordered(lo: f64, hi: f64) -> (f64, f64) {
    if lo <= hi {
        (lo, hi)
    } else {
        (hi, lo)
    }
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

impl AugmentConfig {
    /// Copy with every parameter clamped into its valid range.
    pub fn sanitized(&self) -> Self {
        let nonneg = |v: f64| if v.is_finite() { v.max(0.0) } else { 0.0 };
        let odd = |k: u32| {
            let k = k.max(3);
            if k % 2 == 0 {
                k + 1
            } else {
                k
            }
        };
        let (b0, b1) = (odd(self.blur_kernel.0), odd(self.blur_kernel.1));
        let (q0, q1) = (self.jpeg_quality.0.clamp(1, 100), self.jpeg_quality.1.clamp(1, 100));
        let (s0, s1) = ordered(nonneg(self.scale_range.0), nonneg(self.scale_range.1));
        let (m0, m1) = ordered(nonneg(self.multiplier_range.0), nonneg(self.multiplier_range.1));
        Self {
            probability: if self.probability.is_nan() { 0.0 } else { self.probability.clamp(0.0, 1.0) },
            ops: self.ops,
            shift_limit: nonneg(self.shift_limit).min(1.0),
            scale_range: (s0.max(0.01), s1.max(0.01)),
            rotate_limit_deg: nonneg(self.rotate_limit_deg).min(180.0),
            brightness_limit: nonneg(self.brightness_limit).min(1.0),
            contrast_limit: nonneg(self.contrast_limit).min(1.0),
            blur_kernel: (b0.min(b1), b0.max(b1)),
            noise_var: ordered(nonneg(self.noise_var.0), nonneg(self.noise_var.1)),
            jpeg_quality: (q0.min(q1), q0.max(q1)),
            multiplier_range: (m0, m1),
            dropout_max_holes: self.dropout_max_holes.max(1),
            dropout_max_size: self.dropout_max_size.max(1),
            normalization: self.normalization,
        }
    }

    /// Apply `name = value` lines (blank lines and `#` comments ignored)
    /// on top of `self`. Ranges are written `lo..hi`.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let mut cfg = self.clone();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::InvalidParameter(format!("augment config line {}: {msg}", lineno + 1));
            let (name, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("`{line}` is not name = value")))?;
            let (name, value) = (name.trim(), value.trim());
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(format!("`{v}` is not a number")));
            let range = |v: &str| -> Result<(f64, f64)> {
                let (a, b) = v.split_once("..").ok_or_else(|| bad(format!("`{v}` is not lo..hi")))?;
                Ok((num(a)?, num(b)?))
            };
            let int = |v: &str| v.trim().parse::<u32>().map_err(|_| bad(format!("`{v}` is not an integer")));
            match name {
                "probability" => cfg.probability = num(value)?,
                "ops" => cfg.ops = value.parse()?,
                "shift_limit" => cfg.shift_limit = num(value)?,
                "scale_range" => cfg.scale_range = range(value)?,
                "rotate_limit_deg" => cfg.rotate_limit_deg = num(value)?,
                "brightness_limit" => cfg.brightness_limit = num(value)?,
                "contrast_limit" => cfg.contrast_limit = num(value)?,
                "blur_kernel" => {
                    let (a, b) = value.split_once("..").ok_or_else(|| bad(format!("`{value}` is not lo..hi")))?;
                    cfg.blur_kernel = (int(a)?, int(b)?);
                }
                "noise_var" => cfg.noise_var = range(value)?,
                "jpeg_quality" => {
                    let (a, b) = value.split_once("..").ok_or_else(|| bad(format!("`{value}` is not lo..hi")))?;
                    let q = |v: &str| int(v).map(|x| x.min(100) as u8);
                    cfg.jpeg_quality = (q(a)?, q(b)?);
                }
                "multiplier_range" => cfg.multiplier_range = range(value)?,
                "dropout_max_holes" => cfg.dropout_max_holes = int(value)?,
                "dropout_max_size" => cfg.dropout_max_size = int(value)?,
                "mean" | "std" => {
                    let v = num(value)? as f32;
                    if name == "mean" {
                        cfg.normalization.mean = [v; 3];
                    } else {
                        if v <= 0.0 {
                            return Err(bad("std must be positive".into()));
                        }
                        cfg.normalization.std = [v; 3];
                    }
                }
                other => return Err(bad(format!("unknown setting `{other}`"))),
            }
        }
        Ok(cfg)
    }
}

/// Apply the configured ops; output has the input's dimensions.
pub fn apply_augmentations(img: &RasterImage, cfg: &AugmentConfig, seed: u64) -> RasterImage {
    apply_augmentations_traced(img, cfg, seed).0
}

/// As [`apply_augmentations`], also reporting which ops fired.
pub fn apply_augmentations_traced(img: &RasterImage, cfg: &AugmentConfig, seed: u64) -> (RasterImage, Vec<AugmentOp>) {
    let cfg = cfg.sanitized();
    let mut out = img.clone();
    let mut fired = Vec::new();
    if img.is_empty() {
        return (out, fired);
    }
    for (i, &op) in cfg.ops.ops().iter().enumerate() {
        let mut rng = seed::rng(seed::derive(seed, "augment-op", &[i as u64]));
        if !rng.random_bool(cfg.probability) {
            continue;
        }
        fired.push(op);
        out = apply_op(&out, op, &cfg, &mut rng);
    }
    (out, fired)
}

/// Run one op with parameters drawn from `rng`.
pub fn apply_op(img: &RasterImage, op: AugmentOp, cfg: &AugmentConfig, rng: &mut ChaCha8Rng) -> RasterImage {
    match op {
        AugmentOp::ShiftScaleRotate => {
            let dx = rng.random_range(-1.0..=1.0) * cfg.shift_limit;
            let dy = rng.random_range(-1.0..=1.0) * cfg.shift_limit;
            let scale = sample_range(rng, cfg.scale_range);
            let angle = rng.random_range(-1.0..=1.0) * cfg.rotate_limit_deg;
            shift_scale_rotate(img, dx, dy, scale, angle)
        }
        AugmentOp::HorizontalFlip => horizontal_flip(img),
        AugmentOp::RandomBrightnessContrast => {
            let b = rng.random_range(-1.0..=1.0) * cfg.brightness_limit;
            let c = rng.random_range(-1.0..=1.0) * cfg.contrast_limit;
            brightness_contrast(img, b, c)
        }
        AugmentOp::MotionBlur => {
            let (lo, hi) = cfg.blur_kernel;
            let choices = (hi - lo) / 2 + 1;
            let k = lo + 2 * rng.random_range(0..choices);
            let angle = rng.random_range(0.0..180.0);
            motion_blur(img, k, angle)
        }
        AugmentOp::GaussNoise => {
            let sigma = sample_range(rng, cfg.noise_var).sqrt();
            gauss_noise(img, sigma, rng)
        }
        AugmentOp::ToGray => to_gray(img),
        AugmentOp::ImageCompression => {
            let q = rng.random_range(cfg.jpeg_quality.0..=cfg.jpeg_quality.1);
            image_compression(img, q)
        }
        AugmentOp::MultiplicativeNoise => multiplicative_noise(img, sample_range(rng, cfg.multiplier_range)),
        AugmentOp::CoarseDropout => {
            let holes = rng.random_range(1..=cfg.dropout_max_holes);
            let rects = (0..holes)
                .map(|_| {
                    let w = rng.random_range(1..=cfg.dropout_max_size.min(img.width()));
                    let h = rng.random_range(1..=cfg.dropout_max_size.min(img.height()));
                    let x = rng.random_range(0..=img.width() - w);
                    let y = rng.random_range(0..=img.height() - h);
                    (x, y, w, h)
                })
                .collect::<Vec<_>>();
            coarse_dropout(img, &rects)
        }
    }
}

/// Affine warp about the image center: rotate by `angle_deg`, scale, then
/// shift by the given fractions of width and height. Exposed areas are zero.
pub fn shift_scale_rotate(img: &RasterImage, shift_x: f64, shift_y: f64, scale: f64, angle_deg: f64) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let (tx, ty) = (shift_x * f64::from(w), shift_y * f64::from(h));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let sample = |sx: f64, sy: f64, c: usize| -> f64 {
        if sx < 0.0 || sy < 0.0 || sx >= f64::from(w) || sy >= f64::from(h) {
            0.0
        } else {
            f64::from(img.pixel(sx as u32, sy as u32)[c])
        }
    };
    RasterImage::from_fn(w, h, |x, y| {
        // Inverse-map the output pixel center into the source.
        let (ox, oy) = (f64::from(x) + 0.5 - cx - tx, f64::from(y) + 0.5 - cy - ty);
        let (ux, uy) = (ox / scale, oy / scale);
        let sx = cos * ux + sin * uy + cx - 0.5;
        let sy = -sin * ux + cos * uy + cy - 0.5;
        let (x0, y0) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - x0, sy - y0);
        std::array::from_fn(|c| {
            let top = sample(x0, y0, c) * (1.0 - fx) + sample(x0 + 1.0, y0, c) * fx;
            let bottom = sample(x0, y0 + 1.0, c) * (1.0 - fx) + sample(x0 + 1.0, y0 + 1.0, c) * fx;
            round_u8(top * (1.0 - fy) + bottom * fy)
        })
    })
}

/// Mirror columns.
pub fn horizontal_flip(img: &RasterImage) -> RasterImage {
    let w = img.width();
    RasterImage::from_fn(w, img.height(), |x, y| img.pixel(w - 1 - x, y))
}

/// `v * (1 + contrast) + 255 * brightness`.
pub fn brightness_contrast(img: &RasterImage, brightness: f64, contrast: f64) -> RasterImage {
    map_samples(img, |v| f64::from(v) * (1.0 + contrast) + 255.0 * brightness)
}

/// Blur along a line through the kernel center at `angle_deg`; borders
/// replicate the edge pixels.
pub fn motion_blur(img: &RasterImage, kernel: u32, angle_deg: f64) -> RasterImage {
    let k = kernel.max(1) as i64;
    let c = (k - 1) as f64 / 2.0;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut taps: Vec<(i64, i64)> = Vec::new();
    let steps = 4 * k;
    for s in 0..=steps {
        let t = -c + 2.0 * c * s as f64 / steps as f64;
        let tap = ((c + t * cos).round() as i64 - c as i64, (c + t * sin).round() as i64 - c as i64);
        if !taps.contains(&tap) {
            taps.push(tap);
        }
    }
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let weight = 1.0 / taps.len() as f64;
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = [0.0f64; 3];
        for &(dx, dy) in &taps {
            let sx = (i64::from(x) + dx).clamp(0, w - 1) as u32;
            let sy = (i64::from(y) + dy).clamp(0, h - 1) as u32;
            let p = img.pixel(sx, sy);
            for ch in 0..CHANNELS {
                acc[ch] += f64::from(p[ch]);
            }
        }
        std::array::from_fn(|ch| round_u8(acc[ch] * weight))
    })
}

/// Add independent zero-mean Gaussian noise to every sample.
pub fn gauss_noise(img: &RasterImage, sigma: f64, rng: &mut ChaCha8Rng) -> RasterImage {
    let Ok(normal) = Normal::new(0.0, sigma.max(0.0)) else {
        return img.clone();
    };
    map_samples(img, |v| f64::from(v) + normal.sample(rng))
}

/// Rec. 601 luma replicated into all three channels.
pub fn to_gray(img: &RasterImage) -> RasterImage {
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let [r, g, b] = img.pixel(x, y);
        [round_u8(0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)); 3]
    })
}

/// Round trip through JPEG at `quality` (1..=100).
pub fn image_compression(img: &RasterImage, quality: u8) -> RasterImage {
    let mut buf = Vec::new();
    let encoded = JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
        .encode(img.data(), img.width(), img.height(), image::ExtendedColorType::Rgb8);
    if encoded.is_err() {
        return img.clone();
    }
    match image::load_from_memory_with_format(&buf, image::ImageFormat::Jpeg) {
        Ok(decoded) => {
            let rgb = decoded.to_rgb8();
            if rgb.dimensions() == (img.width(), img.height()) {
                RasterImage::from_rgb_image(rgb)
            } else {
                img.clone()
            }
        }
        Err(_) => img.clone(),
    }
}

/// Scale every sample by one factor.
pub fn multiplicative_noise(img: &RasterImage, factor: f64) -> RasterImage {
    map_samples(img, |v| f64::from(v) * factor)
}

/// Zero the given `(x, y, w, h)` rectangles, clipped to the image.
pub fn coarse_dropout(img: &RasterImage, holes: &[(u32, u32, u32, u32)]) -> RasterImage {
    let mut out = img.clone();
    for &(x, y, w, h) in holes {
        for yy in y..y.saturating_add(h).min(img.height()) {
            for xx in x..x.saturating_add(w).min(img.width()) {
                out.set_pixel(xx, yy, [0; 3]);
            }
        }
    }
    out
}

fn map_samples(img: &RasterImage, mut f: impl FnMut(u8) -> f64) -> RasterImage {
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = round_u8(f(*v));
    }
    out
}

/// `H x W x 3` real tensor, channel-interleaved.
pub type Tensor3 = Vec<f32>;

/// `(x / 255 - mean) / std` per channel.
pub fn normalize(img: &RasterImage, norm: &Normalization) -> Tensor3 {
    img.data()
        .chunks_exact(CHANNELS)
        .flat_map(|px| (0..CHANNELS).map(move |c| (f32::from(px[c]) / 255.0 - norm.mean[c]) / norm.std[c]))
        .collect()
}

/// `x / 255`.
pub fn scale_only(img: &RasterImage) -> Tensor3 {
    img.data().iter().map(|&v| f32::from(v) / 255.0).collect()
}

/// Preprocessing recipe for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    /// Scrambling subtasks: augment and normalize both images.
    S12,
    /// Augment and normalize the original; divide the encoded image by 255.
    T1,
    /// Divide both by 255.
    T2,
    /// Augment both with the extended op set, normalize both.
    T3,
}

impl Approach {
    /// S12 for the scrambling subtasks, T1 for the encrypted one.
    pub fn default_for(subtask: Subtask) -> Self {
        match subtask {
            Subtask::Tiled | Subtask::FullFrame => Approach::S12,
            Subtask::Encrypted => Approach::T1,
        }
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S12" => Ok(Approach::S12),
            "T1" => Ok(Approach::T1),
            "T2" => Ok(Approach::T2),
            "T3" => Ok(Approach::T3),
            _ => Err(Error::InvalidParameter(format!("approach must be S12, T1, T2 or T3, got `{s}`"))),
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::S12 => "S12",
            Approach::T1 => "T1",
            Approach::T2 => "T2",
            Approach::T3 => "T3",
        })
    }
}

/// The encoded side of a pair.
#[derive(Debug, Clone, Copy)]
pub enum EncodedInput<'a> {
    Image(&'a RasterImage),
    /// A ciphertext blob, viewed through [`bfv::ciphertext_to_image`] at the
    /// original's dimensions.
    Blob(&'a [u8]),
}

/// Original and encoded channels stacked into `H x W x 6`.
#[derive(Debug, Clone, PartialEq)]
pub struct SixChannelSample {
    pub height: u32,
    pub width: u32,
    /// Channel-interleaved, channels 0..3 from the original and 3..6 from
    /// the encoded image.
    pub data: Vec<f32>,
    pub pair_id: u64,
    pub label: Option<Label>,
}

impl SixChannelSample {
    pub const CHANNELS: usize = 6;

    pub fn stack(height: u32, width: u32, original: &[f32], encoded: &[f32]) -> Self {
        let data = original
            .chunks_exact(CHANNELS)
            .zip(encoded.chunks_exact(CHANNELS))
            .flat_map(|(a, b)| a.iter().chain(b).copied())
            .collect();
        Self {
            height,
            width,
            data,
            pair_id: 0,
            label: None,
        }
    }

    /// The original (`false`) or encoded (`true`) three channels, interleaved.
    pub fn half(&self, encoded: bool) -> Vec<f32> {
        let off = if encoded { 3 } else { 0 };
        self.data
            .chunks_exact(Self::CHANNELS)
            .flat_map(|px| px[off..off + 3].iter().copied())
            .collect()
    }
}

/// Build one training sample according to `approach`.
pub fn make_sample(
    original: &RasterImage,
    encoded: EncodedInput<'_>,
    approach: Approach,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<SixChannelSample> {
    let converted;
    let encoded = match encoded {
        EncodedInput::Image(img) => img,
        EncodedInput::Blob(blob) => {
            converted = bfv::ciphertext_to_image(blob, original.width(), original.height())?;
            &converted
        }
    };
    if (encoded.width(), encoded.height()) != (original.width(), original.height()) {
        return Err(Error::DimensionMismatch(format!(
            "original is {}x{} but encoded image is {}x{}",
            original.width(),
            original.height(),
            encoded.width(),
            encoded.height()
        )));
    }
    let with_ops = |ops: OpSet| AugmentConfig { ops, ..cfg.clone() };
    let orig_seed = seed::derive(seed, "sample-original", &[]);
    let enc_seed = seed::derive(seed, "sample-encoded", &[]);
    let norm = &cfg.normalization;
    let (o, e) = match approach {
        Approach::S12 => {
            let c = with_ops(OpSet::Standard);
            (
                normalize(&apply_augmentations(original, &c, orig_seed), norm),
                normalize(&apply_augmentations(encoded, &c, enc_seed), norm),
            )
        }
        Approach::T1 => (
            normalize(&apply_augmentations(original, &with_ops(OpSet::Standard), orig_seed), norm),
            scale_only(encoded),
        ),
        Approach::T2 => (scale_only(original), scale_only(encoded)),
        Approach::T3 => {
            let c = with_ops(OpSet::Extended);
            (
                normalize(&apply_augmentations(original, &c, orig_seed), norm),
                normalize(&apply_augmentations(encoded, &c, enc_seed), norm),
            )
        }
    };
    Ok(SixChannelSample::stack(original.height(), original.width(), &o, &e))
}

/// Side-by-side before/after rows with a 4-pixel gray gutter.
pub fn preview_grid(pairs: &[(RasterImage, RasterImage)]) -> RasterImage {
    const GAP: u32 = 4;
    let cell_w = pairs.iter().map(|(a, b)| a.width().max(b.width())).max().unwrap_or(0);
    let cell_h = pairs.iter().map(|(a, b)| a.height().max(b.height())).max().unwrap_or(0);
    let rows = pairs.len() as u32;
    let mut canvas = RasterImage::from_fn(2 * cell_w + 3 * GAP, rows * (cell_h + GAP) + GAP, |_, _| [128; 3]);
    for (i, (before, after)) in pairs.iter().enumerate() {
        let y = GAP + i as u32 * (cell_h + GAP);
        canvas.paste(before, GAP, y);
        canvas.paste(after, 2 * GAP + cell_w, y);
    }
    canvas
}
