//! 8-bit RGB raster images and the resampling used throughout the pipelines.

use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

pub const CHANNELS: usize = 3;

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::InvalidDimension(format!(
                "{width}x{height} RGB image needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * CHANNELS],
        }
    }

    /// Build an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, px: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + CHANNELS].copy_from_slice(&px);
    }

    /// Copy of the `w x h` region whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if x.checked_add(w).is_none_or(|r| r > self.width)
            || y.checked_add(h).is_none_or(|b| b > self.height)
        {
            return Err(Error::InvalidCrop {
                x,
                y,
                w,
                h,
                img_w: self.width,
                img_h: self.height,
            });
        }
        let mut data = Vec::with_capacity(w as usize * h as usize * CHANNELS);
        for row in y..y + h {
            let start = self.offset(x, row);
            data.extend_from_slice(&self.data[start..start + w as usize * CHANNELS]);
        }
        Self::new(w, h, data)
    }

    /// Paste `src` with its top-left corner at `(x, y)`; `src` must fit.
    pub fn paste(&mut self, src: &RasterImage, x: u32, y: u32) {
        debug_assert!(x + src.width <= self.width && y + src.height <= self.height);
        let row_len = src.width as usize * CHANNELS;
        for row in 0..src.height {
            let dst = self.offset(x, y + row);
            let s = src.offset(0, row);
            self.data[dst..dst + row_len].copy_from_slice(&src.data[s..s + row_len]);
        }
    }

    /// Resample to `width x height`. Each axis uses bilinear interpolation
    /// when shrinking and nearest-neighbour when enlarging; an axis whose
    /// size does not change is copied.
    pub fn resize(&self, width: u32, height: u32) -> Result<Self> {
        if self.is_empty() || width == 0 || height == 0 {
            return Err(Error::InvalidDimension(format!(
                "cannot resize {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let xs = axis_taps(self.width, width);
        let ys = axis_taps(self.height, height);
        let mut out = Self::zeros(width, height);
        for (oy, ty) in ys.iter().enumerate() {
            for (ox, tx) in xs.iter().enumerate() {
                let p00 = self.pixel(tx.lo, ty.lo);
                let p01 = self.pixel(tx.hi, ty.lo);
                let p10 = self.pixel(tx.lo, ty.hi);
                let p11 = self.pixel(tx.hi, ty.hi);
                let mut px = [0u8; 3];
                for c in 0..CHANNELS {
                    let top = f64::from(p00[c]) * (1.0 - tx.w) + f64::from(p01[c]) * tx.w;
                    let bottom = f64::from(p10[c]) * (1.0 - tx.w) + f64::from(p11[c]) * tx.w;
                    px[c] = round_u8(top * (1.0 - ty.w) + bottom * ty.w);
                }
                out.set_pixel(ox as u32, oy as u32, px);
            }
        }
        Ok(out)
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction")
    }

    pub fn from_rgb_image(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Self {
            width,
            height,
            data: img.into_raw(),
        }
    }

    /// Load any format the `image` crate understands, converted to RGB8.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_rgb_image(img.to_rgb8()))
    }

    /// Save losslessly. `.ppm`/`.pnm` write binary PPM, anything else PNG.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("ppm") | Some("pnm") => ImageFormat::Pnm,
            _ => ImageFormat::Png,
        };
        let bytes = self.encode(format)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Encode to an in-memory PNG or PPM byte string.
    pub fn encode(&self, format: ImageFormat) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut buf, format)
            .map_err(|source| Error::Image {
                path: "<memory>".into(),
                source,
            })?;
        Ok(buf.into_inner())
    }

    /// Mean over all samples of all channels.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }
}

#[inline]
pub(crate) fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: u32,
    hi: u32,
    w: f64,
}

fn axis_taps(src: u32, dst: u32) -> Vec<Tap> {
    let scale = f64::from(src) / f64::from(dst);
    (0..dst)
        .map(|d| {
            if dst == src {
                Tap { lo: d, hi: d, w: 0.0 }
            } else if dst > src {
                let s = (((f64::from(d) + 0.5) * scale).floor() as u32).min(src - 1);
                Tap { lo: s, hi: s, w: 0.0 }
            } else {
                let pos = ((f64::from(d) + 0.5) * scale - 0.5).clamp(0.0, f64::from(src - 1));
                let lo = pos.floor() as u32;
                let hi = (lo + 1).min(src - 1);
                Tap {
                    lo,
                    hi,
                    w: pos - f64::from(lo),
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 5 % 256) as u8, ((x + y) % 256) as u8])
    }

    #[test]
    fn new_checks_length() {
        assert!(RasterImage::new(2, 2, vec![0; 12]).is_ok());
        assert!(RasterImage::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn crop_bounds() {
        let img = gradient(10, 8);
        let c = img.crop(2, 3, 4, 5).unwrap();
        assert_eq!(c.pixel(0, 0), img.pixel(2, 3));
        assert_eq!(c.pixel(3, 4), img.pixel(5, 7));
        assert!(img.crop(7, 0, 4, 1).is_err());
        assert!(img.crop(0, 0, u32::MAX, 1).is_err());
    }

    #[test]
    fn paste_inverts_crop() {
        let img = gradient(9, 9);
        let c = img.crop(3, 1, 4, 6).unwrap();
        let mut blank = RasterImage::zeros(9, 9);
        blank.paste(&c, 3, 1);
        assert_eq!(blank.crop(3, 1, 4, 6).unwrap(), c);
    }

    #[test]
    fn halving_is_box_average() {
        let img = RasterImage::from_fn(4, 2, |x, _| [(x * 10) as u8; 3]);
        let out = img.resize(2, 1).unwrap();
        assert_eq!(out.pixel(0, 0), [5; 3]);
        assert_eq!(out.pixel(1, 0), [25; 3]);
    }

    #[test]
    fn doubling_is_nearest() {
        let img = gradient(3, 3);
        let out = img.resize(6, 6).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(out.pixel(x, y), img.pixel(x / 2, y / 2));
            }
        }
    }

    #[test]
    fn same_size_resize_is_copy() {
        let img = gradient(5, 7);
        assert_eq!(img.resize(5, 7).unwrap(), img);
        assert!(img.resize(0, 7).is_err());
    }

    #[test]
    fn png_and_ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = gradient(13, 6);
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            img.save(&p).unwrap();
            assert_eq!(RasterImage::load(&p).unwrap(), img);
        }
    }

    #[test]
    fn load_missing_file_is_io() {
        let err = RasterImage::load("/nonexistent/definitely.png").unwrap_err();
        assert!(err.is_io());
    }
}
