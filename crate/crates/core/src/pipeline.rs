//! Encoding pipelines for the scrambling subtasks and the face-crop
//! preparation used before homomorphic encryption.
//!
//! Pixel `p` of a block is moved to `F^k(p)`, where `F` is the cat map of the
//! key; all three channels share the permutation.

use rayon::prelude::*;

use crate::chaos::{self, CatMapKey};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, CHANNELS};
use crate::seed;

/// Side length of the normalized frames fed to the scramblers.
pub const FRAME_SIDE: u32 = 512;
/// Tile side for tile-wise scrambling.
pub const TILE_SIDE: u32 = 32;
/// Side length of the face crops that get encrypted.
pub const FACE_SIDE: u32 = 52;
/// Longest-to-shortest side ratio kept before padding.
pub const DEFAULT_MAX_ASPECT: f64 = 4.0 / 3.0;

/// Crop, pad and scale an arbitrary image to a `side x side` square using the
/// default aspect limit.
pub fn normalize_geometry(img: &RasterImage, side: u32) -> Result<RasterImage> {
    normalize_geometry_with(img, side, DEFAULT_MAX_ASPECT)
}

/// Center-crop the longer axis down to `max_aspect`, zero-pad symmetrically
/// to a square, then resample to `side`.
pub fn normalize_geometry_with(img: &RasterImage, side: u32, max_aspect: f64) -> Result<RasterImage> {
    if img.is_empty() {
        return Err(Error::InvalidDimension(format!(
            "cannot normalize a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    if side == 0 {
        return Err(Error::InvalidDimension("target side must be positive".into()));
    }
    if !(max_aspect >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "max aspect ratio must be >= 1, got {max_aspect}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let limit = |short: u32| ((f64::from(short) * max_aspect + 1e-9).floor() as u32).max(short);
    let cropped = if w > h && w > limit(h) {
        let cw = limit(h);
        img.crop((w - cw) / 2, 0, cw, h)?
    } else if h > w && h > limit(w) {
        let ch = limit(w);
        img.crop(0, (h - ch) / 2, w, ch)?
    } else {
        img.clone()
    };
    let (cw, ch) = (cropped.width(), cropped.height());
    let square_side = cw.max(ch);
    let squared = if cw == ch {
        cropped
    } else {
        let mut canvas = RasterImage::zeros(square_side, square_side);
        canvas.paste(&cropped, (square_side - cw) / 2, (square_side - ch) / 2);
        canvas
    };
    squared.resize(side, side)
}

/// A square image cut into square tiles, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    tile_size: u32,
    per_side: u32,
    tiles: Vec<RasterImage>,
}

impl TileGrid {
    pub fn split(img: &RasterImage, tile_size: u32) -> Result<Self> {
        check_tileable(img, tile_size)?;
        let per_side = img.width() / tile_size;
        let mut tiles = Vec::with_capacity((per_side * per_side) as usize);
        for ty in 0..per_side {
            for tx in 0..per_side {
                tiles.push(img.crop(tx * tile_size, ty * tile_size, tile_size, tile_size)?);
            }
        }
        Ok(Self {
            tile_size,
            per_side,
            tiles,
        })
    }

    pub fn tile_size(&self) -> u32 {
        self.tile_size
    }

    pub fn tiles_per_side(&self) -> u32 {
        self.per_side
    }

    pub fn tiles(&self) -> &[RasterImage] {
        &self.tiles
    }

    pub fn tile(&self, tx: u32, ty: u32) -> &RasterImage {
        &self.tiles[(ty * self.per_side + tx) as usize]
    }

    pub fn reassemble(&self) -> RasterImage {
        let side = self.tile_size * self.per_side;
        let mut out = RasterImage::zeros(side, side);
        for (i, tile) in self.tiles.iter().enumerate() {
            let i = i as u32;
            out.paste(tile, (i % self.per_side) * self.tile_size, (i / self.per_side) * self.tile_size);
        }
        out
    }
}

fn check_tileable(img: &RasterImage, tile_size: u32) -> Result<()> {
    if img.width() != img.height() {
        return Err(Error::DimensionMismatch(format!(
            "tiling needs a square image, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    if tile_size == 0 || img.width() == 0 || img.width() % tile_size != 0 {
        return Err(Error::DimensionMismatch(format!(
            "side {} is not divisible by tile size {tile_size}",
            img.width()
        )));
    }
    Ok(())
}

/// How the iteration count is chosen for each tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TileKeying {
    /// Every tile uses the key as given.
    #[default]
    Shared,
    /// Each tile's iteration count is derived from the tile index and a
    /// master seed; the key's own iteration count is mixed into the hash.
    PerTile { master_seed: u64 },
}

impl TileKeying {
    fn tile_key(&self, key: &CatMapKey, tile_index: u64) -> Result<CatMapKey> {
        match *self {
            TileKeying::Shared => Ok(*key),
            TileKeying::PerTile { master_seed } => {
                let cap = 6 * u64::from(key.grid_size());
                let period = chaos::period_with_cap(key, cap)?;
                if period <= 1 {
                    return Ok(*key);
                }
                let h = seed::derive(
                    master_seed,
                    "tile-iterations",
                    &[tile_index, u64::from(key.iterations())],
                );
                key.with_iterations(1 + (h % (period - 1)) as u32)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Encode,
    Decode,
}

fn permute_tiles(img: &RasterImage, key: &CatMapKey, keying: TileKeying, dir: Direction) -> Result<RasterImage> {
    let n = key.grid_size();
    check_tileable(img, n)?;
    let per_side = img.width() / n;
    let tile_keys: Vec<CatMapKey> = (0..u64::from(per_side) * u64::from(per_side))
        .map(|i| keying.tile_key(key, i))
        .collect::<Result<_>>()?;
    let shared = matches!(keying, TileKeying::Shared).then(|| key.permutation());

    let side = img.width() as usize;
    let row_bytes = side * CHANNELS;
    let band_bytes = row_bytes * n as usize;
    let src = img.data();
    let mut out = vec![0u8; src.len()];
    out.par_chunks_mut(band_bytes)
        .enumerate()
        .for_each(|(ty, band)| {
            for tx in 0..per_side as usize {
                let index = ty * per_side as usize + tx;
                let owned;
                let perm = match &shared {
                    Some(p) => p,
                    None => {
                        owned = tile_keys[index].permutation();
                        &owned
                    }
                };
                let x0 = tx * n as usize;
                let y0 = ty * n as usize;
                for (i, &j) in perm.iter().enumerate() {
                    let (sx, sy) = (i % n as usize, i / n as usize);
                    let (dx, dy) = (j as usize % n as usize, j as usize / n as usize);
                    // Encode moves pixel i to j; decode pulls it back.
                    let ((fx, fy), (lx, ly)) = match dir {
                        Direction::Encode => ((sx, sy), (dx, dy)),
                        Direction::Decode => ((dx, dy), (sx, sy)),
                    };
                    let s = ((y0 + fy) * side + x0 + fx) * CHANNELS;
                    let d = (ly * side + x0 + lx) * CHANNELS;
                    band[d..d + CHANNELS].copy_from_slice(&src[s..s + CHANNELS]);
                }
            }
        });
    RasterImage::new(img.width(), img.height(), out)
}

/// Scramble every `N x N` tile independently, `N` being the key's grid size.
pub fn encode_tiled(img: &RasterImage, key: &CatMapKey, keying: TileKeying) -> Result<RasterImage> {
    permute_tiles(img, key, keying, Direction::Encode)
}

/// Exact inverse of [`encode_tiled`] for the same key and keying.
pub fn decode_tiled(img: &RasterImage, key: &CatMapKey, keying: TileKeying) -> Result<RasterImage> {
    permute_tiles(img, key, keying, Direction::Decode)
}

/// Scramble the whole frame with one permutation; the key's grid size must
/// equal the image side.
pub fn encode_fullframe(img: &RasterImage, key: &CatMapKey) -> Result<RasterImage> {
    check_fullframe(img, key)?;
    permute_tiles(img, key, TileKeying::Shared, Direction::Encode)
}

pub fn decode_fullframe(img: &RasterImage, key: &CatMapKey) -> Result<RasterImage> {
    check_fullframe(img, key)?;
    permute_tiles(img, key, TileKeying::Shared, Direction::Decode)
}

fn check_fullframe(img: &RasterImage, key: &CatMapKey) -> Result<()> {
    if img.width() != img.height() || img.width() != key.grid_size() {
        return Err(Error::DimensionMismatch(format!(
            "full-frame key with N={} cannot scramble a {}x{} image",
            key.grid_size(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl CropBox {
    pub fn square(x: u32, y: u32, side: u32) -> Self {
        Self {
            x,
            y,
            width: side,
            height: side,
        }
    }

    /// Largest centered square inside a `width x height` frame. Stands in for
    /// a face detector.
    pub fn centered_square(width: u32, height: u32) -> Self {
        let side = width.min(height);
        Self::square((width - side) / 2, (height - side) / 2, side)
    }
}

/// Cut a square region and scale it to `FACE_SIDE x FACE_SIDE`.
pub fn prepare_face_crop(img: &RasterImage, crop: CropBox) -> Result<RasterImage> {
    let invalid = || Error::InvalidCrop {
        x: crop.x,
        y: crop.y,
        w: crop.width,
        h: crop.height,
        img_w: img.width(),
        img_h: img.height(),
    };
    if crop.width != crop.height || crop.width == 0 {
        return Err(invalid());
    }
    let region = img.crop(crop.x, crop.y, crop.width, crop.height).map_err(|_| invalid())?;
    region.resize(FACE_SIDE, FACE_SIDE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noise_image(w: u32, h: u32, seed: u64) -> RasterImage {
        let mut rng = seed::rng(seed);
        let data = (0..w as usize * h as usize * 3).map(|_| rng.random()).collect();
        RasterImage::new(w, h, data).unwrap()
    }

    fn histogram(img: &RasterImage) -> Vec<u32> {
        let mut h = vec![0u32; 256 * 3];
        for px in img.data().chunks_exact(3) {
            for c in 0..3 {
                h[c * 256 + px[c] as usize] += 1;
            }
        }
        h
    }

    #[test]
    fn conforming_input_is_untouched() {
        let img = noise_image(512, 512, 1);
        assert_eq!(normalize_geometry(&img, 512).unwrap(), img);
    }

    #[test]
    fn square_input_is_only_scaled() {
        let img = noise_image(1024, 1024, 2);
        let out = normalize_geometry(&img, 512).unwrap();
        assert_eq!(out, img.resize(512, 512).unwrap());
    }

    #[test]
    fn landscape_input_is_padded_with_zeros() {
        // 640x480 is exactly 4:3, so nothing is cropped; rows 0..80 and
        // 560..640 of the padded canvas are zero, which maps to output rows
        // 0..64 and 448..512 away from the content edge.
        let img = RasterImage::from_fn(640, 480, |_, _| [200, 100, 50]);
        let out = normalize_geometry(&img, 512).unwrap();
        assert_eq!((out.width(), out.height()), (512, 512));
        for (x, y) in [(0, 0), (511, 0), (0, 511), (511, 511)] {
            assert_eq!(out.pixel(x, y), [0, 0, 0]);
        }
        for x in (0..512).step_by(37) {
            assert_eq!(out.pixel(x, 63), [0, 0, 0]);
            assert_eq!(out.pixel(x, 448), [0, 0, 0]);
            assert_eq!(out.pixel(x, 256), [200, 100, 50]);
        }
    }

    #[test]
    fn wide_input_is_cropped_to_four_thirds() {
        // 300x100: crop to 133x100 centered, pad to 133x133.
        let img = RasterImage::from_fn(300, 100, |x, _| [x as u8, 0, 0]);
        let out = normalize_geometry(&img, 133).unwrap();
        let offset = (300 - 133) / 2;
        let top_pad = (133 - 100) / 2;
        assert_eq!(out.pixel(0, top_pad), [offset as u8, 0, 0]);
        assert_eq!(out.pixel(132, top_pad + 99), [(offset + 132) as u8, 0, 0]);
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let img = noise_image(700, 300, 3);
        let once = normalize_geometry(&img, 128).unwrap();
        assert_eq!(normalize_geometry(&once, 128).unwrap(), once);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            normalize_geometry(&RasterImage::zeros(0, 10), 512),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn tile_grid_round_trip() {
        let img = noise_image(128, 128, 4);
        let grid = TileGrid::split(&img, 32).unwrap();
        assert_eq!(grid.tiles().len(), 16);
        assert_eq!(grid.tile(1, 2), &img.crop(32, 64, 32, 32).unwrap());
        assert_eq!(grid.reassemble(), img);
        assert!(TileGrid::split(&noise_image(100, 100, 0), 32).is_err());
    }

    #[test]
    fn identity_key_leaves_image_unchanged() {
        let img = noise_image(512, 512, 5);
        let id32 = CatMapKey::new(32, 0, 0, 3).unwrap();
        assert_eq!(encode_tiled(&img, &id32, TileKeying::Shared).unwrap(), img);
        let id512 = CatMapKey::new(512, 0, 0, 3).unwrap();
        assert_eq!(encode_fullframe(&img, &id512).unwrap(), img);
    }

    #[test]
    fn tiled_encoding_matches_pointwise_map() {
        let img = noise_image(64, 64, 6);
        let key = CatMapKey::new(32, 2, 3, 5).unwrap();
        let out = encode_tiled(&img, &key, TileKeying::Shared).unwrap();
        for ty in 0..2 {
            for tx in 0..2 {
                for y in 0..32 {
                    for x in 0..32 {
                        let q = chaos::cat_map_forward(chaos::GridPoint { x, y }, &key);
                        assert_eq!(
                            out.pixel(tx * 32 + q.x, ty * 32 + q.y),
                            img.pixel(tx * 32 + x, ty * 32 + y)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn tiled_encoding_preserves_tile_histograms_and_round_trips() {
        let img = noise_image(512, 512, 7);
        let key = CatMapKey::classic(32, 5).unwrap();
        for keying in [TileKeying::Shared, TileKeying::PerTile { master_seed: 99 }] {
            let enc = encode_tiled(&img, &key, keying).unwrap();
            assert_ne!(enc, img);
            let (a, b) = (TileGrid::split(&img, 32).unwrap(), TileGrid::split(&enc, 32).unwrap());
            for (ta, tb) in a.tiles().iter().zip(b.tiles()) {
                assert_eq!(histogram(ta), histogram(tb));
            }
            assert_eq!(decode_tiled(&enc, &key, keying).unwrap(), img);
        }
    }

    #[test]
    fn per_tile_keys_differ_across_tiles() {
        let img = noise_image(512, 512, 8);
        let key = CatMapKey::classic(32, 5).unwrap();
        let shared = encode_tiled(&img, &key, TileKeying::Shared).unwrap();
        let per_tile = encode_tiled(&img, &key, TileKeying::PerTile { master_seed: 1 }).unwrap();
        assert_ne!(shared, per_tile);
    }

    #[test]
    fn remaining_period_iterations_decode() {
        let img = noise_image(512, 512, 9);
        let key = CatMapKey::classic(32, 7).unwrap();
        let enc = encode_tiled(&img, &key, TileKeying::Shared).unwrap();
        let rest = chaos::period(&key).unwrap() as u32 - 7;
        let back = encode_tiled(&enc, &key.with_iterations(rest).unwrap(), TileKeying::Shared).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn fullframe_round_trip_and_histogram() {
        let img = noise_image(512, 512, 10);
        let key = CatMapKey::new(512, 3, 7, 11).unwrap();
        let enc = encode_fullframe(&img, &key).unwrap();
        assert_ne!(enc, img);
        assert_eq!(histogram(&enc), histogram(&img));
        assert_eq!(decode_fullframe(&enc, &key).unwrap(), img);
    }

    #[test]
    fn dimension_errors() {
        let img = noise_image(100, 100, 11);
        let key = CatMapKey::classic(32, 1).unwrap();
        assert!(matches!(
            encode_tiled(&img, &key, TileKeying::Shared),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(encode_fullframe(&img, &key), Err(Error::DimensionMismatch(_))));
        assert!(encode_tiled(&noise_image(64, 32, 0), &key, TileKeying::Shared).is_err());
    }

    #[test]
    fn face_crop_identity_and_downscale() {
        let small = noise_image(52, 52, 12);
        assert_eq!(prepare_face_crop(&small, CropBox::square(0, 0, 52)).unwrap(), small);

        let big = noise_image(104, 104, 13);
        let out = prepare_face_crop(&big, CropBox::square(0, 0, 104)).unwrap();
        assert_eq!((out.width(), out.height()), (52, 52));
        assert!((out.mean() - big.mean()).abs() <= 2.0);
    }

    #[test]
    fn face_crop_rejects_bad_boxes() {
        let img = noise_image(60, 60, 14);
        let non_square = CropBox { x: 0, y: 0, width: 40, height: 30 };
        assert!(matches!(prepare_face_crop(&img, non_square), Err(Error::InvalidCrop { .. })));
        assert!(prepare_face_crop(&img, CropBox::square(30, 30, 40)).is_err());
        assert_eq!(CropBox::centered_square(80, 60), CropBox::square(10, 0, 60));
    }
}
