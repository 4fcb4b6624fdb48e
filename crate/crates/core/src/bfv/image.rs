//! Encrypting 8-bit images, and turning ciphertext blobs back into pictures
//! for the matcher.

use super::codec::{self, BlobHeader, BLOB_HEADER_LEN};
use super::scheme::{Bfv, PlaintextPoly, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, CHANNELS};
use crate::seed;

/// Pack the image bytes (row-major, channel-interleaved) into consecutive
/// plaintext polynomials; the last one is zero-padded.
pub fn pack_image(img: &RasterImage, bfv: &Bfv) -> Result<Vec<PlaintextPoly>> {
    let params = bfv.params();
    if params.t <= 255 {
        return Err(Error::InvalidParameter(format!(
            "plaintext modulus {} cannot hold a byte",
            params.t
        )));
    }
    img.data()
        .chunks(params.n)
        .map(|chunk| {
            let mut coeffs: Vec<u64> = chunk.iter().map(|&b| u64::from(b)).collect();
            coeffs.resize(params.n, 0);
            PlaintextPoly::new(coeffs, params)
        })
        .collect()
}

/// Encrypt every packed polynomial and concatenate them into one blob.
pub fn encrypt_image(bfv: &Bfv, img: &RasterImage, pk: &PublicKey, seed: u64) -> Result<Vec<u8>> {
    let cts = pack_image(img, bfv)?
        .iter()
        .enumerate()
        .map(|(i, m)| bfv.encrypt(m, pk, seed::derive(seed, "bfv-image", &[i as u64])))
        .collect::<Result<Vec<_>>>()?;
    codec::write_blob(bfv.params(), &cts)
}

pub fn decrypt_image(bfv: &Bfv, blob: &[u8], sk: &SecretKey, width: u32, height: u32) -> Result<RasterImage> {
    let cts = codec::read_blob(bfv.params(), blob)?;
    let len = width as usize * height as usize * CHANNELS;
    let needed = len.div_ceil(bfv.params().n);
    if cts.len() != needed {
        return Err(Error::DimensionMismatch(format!(
            "blob holds {} ciphertexts, a {width}x{height} image needs {needed}",
            cts.len()
        )));
    }
    let mut data = Vec::with_capacity(needed * bfv.params().n);
    for c in &cts {
        for &v in bfv.decrypt(c, sk)?.coeffs() {
            let byte = u8::try_from(v)
                .map_err(|_| Error::Malformed(format!("decrypted value {v} is not a byte")))?;
            data.push(byte);
        }
    }
    data.truncate(len);
    RasterImage::new(width, height, data)
}

/// Deterministic byte-to-pixel view of a blob: the payload after the header
/// fills a square RGB canvas of side `ceil(sqrt(ceil(L / 3)))` row-major,
/// the tail is zero-padded, and the canvas is resized to the target.
pub fn ciphertext_to_image(blob: &[u8], width: u32, height: u32) -> Result<RasterImage> {
    let header = BlobHeader::parse(blob)?;
    let payload = &blob[BLOB_HEADER_LEN..];
    if header.payload_len() != Some(payload.len()) {
        return Err(Error::Malformed(format!(
            "blob header declares {} ciphertexts but the payload has {} bytes",
            header.count,
            payload.len()
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimension(format!("target {width}x{height} is empty")));
    }
    if payload.is_empty() {
        return Ok(RasterImage::zeros(width, height));
    }
    let pixels = payload.len().div_ceil(CHANNELS);
    let side = ceil_sqrt(pixels);
    let mut data = payload.to_vec();
    data.resize(side * side * CHANNELS, 0);
    RasterImage::new(side as u32, side as u32, data)?.resize(width, height)
}

fn ceil_sqrt(v: usize) -> usize {
    let mut r = (v as f64).sqrt() as usize;
    while r * r < v {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= v {
        r -= 1;
    }
    r
}
