//! Six-channel sample files and their index.
//!
//! Sample binary layout, little-endian:
//!
//! ```text
//! magic "SIX1" | dtype u8 | label u8 | reserved u16
//! height u32 | width u32 | channels u32 | pair_id u64
//! height * width * channels values, channel-interleaved
//! ```
//!
//! dtype 1 is `f32`. Label 255 means unlabeled.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::augment::{make_sample, Approach, AugmentConfig, EncodedInput, SixChannelSample};
use crate::dataset::{Label, PairManifest, Split};
use crate::error::{Error, Result};
use crate::evalkit::ScoreRow;
use crate::raster::RasterImage;
use crate::seed;

pub const SAMPLE_MAGIC: &[u8; 4] = b"SIX1";
pub const SAMPLE_HEADER_LEN: usize = 28;
pub const DTYPE_F32_LE: u8 = 1;
pub const SAMPLE_INDEX_FILE: &str = "samples.csv";
pub const SAMPLE_INDEX_COLUMNS: &str = "pair_id,label,split,file";
const UNLABELED: u8 = 255;

pub fn write_sample(sample: &SixChannelSample) -> Vec<u8> {
    let mut out = Vec::with_capacity(SAMPLE_HEADER_LEN + 4 * sample.data.len());
    out.extend_from_slice(SAMPLE_MAGIC);
    out.push(DTYPE_F32_LE);
    out.push(sample.label.map_or(UNLABELED, Label::value));
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&sample.height.to_le_bytes());
    out.extend_from_slice(&sample.width.to_le_bytes());
    out.extend_from_slice(&(SixChannelSample::CHANNELS as u32).to_le_bytes());
    out.extend_from_slice(&sample.pair_id.to_le_bytes());
    for v in &sample.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_sample(bytes: &[u8]) -> Result<SixChannelSample> {
    let bad = |m: &str| Error::Malformed(format!("sample file: {m}"));
    if bytes.len() < SAMPLE_HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != SAMPLE_MAGIC {
        return Err(bad("bad magic"));
    }
    if bytes[4] != DTYPE_F32_LE {
        return Err(bad(&format!("unsupported dtype {}", bytes[4])));
    }
    let label = match bytes[5] {
        UNLABELED => None,
        v => Some(Label::from_value(v)?),
    };
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let (height, width, channels) = (u32_at(8), u32_at(12), u32_at(16));
    let pair_id = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    if channels as usize != SixChannelSample::CHANNELS {
        return Err(bad(&format!("expected 6 channels, found {channels}")));
    }
    let count = (height as usize)
        .checked_mul(width as usize)
        .and_then(|v| v.checked_mul(channels as usize))
        .ok_or_else(|| bad("dimensions overflow"))?;
    let payload = &bytes[SAMPLE_HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(bad(&format!("payload is {} bytes, header implies {}", payload.len(), count * 4)));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SixChannelSample {
        height,
        width,
        data,
        pair_id,
        label,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndexRow {
    pub pair_id: u64,
    pub label: Label,
    pub split: Split,
    /// Relative to the index file.
    pub file: String,
}

pub fn index_to_csv(rows: &[SampleIndexRow]) -> String {
    let mut out = format!("{SAMPLE_INDEX_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.pair_id, r.label.value(), r.split, r.file);
    }
    out
}

pub fn parse_index(text: &str) -> Result<Vec<SampleIndexRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SAMPLE_INDEX_COLUMNS) {
        return Err(Error::Malformed(format!("sample index must start with `{SAMPLE_INDEX_COLUMNS}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Malformed(format!("sample index line {}: `{line}`", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            let [id, label, split, file] = f[..] else {
                return Err(bad());
            };
            Ok(SampleIndexRow {
                pair_id: id.parse().map_err(|_| bad())?,
                label: Label::from_value(label.parse().map_err(|_| bad())?)?,
                split: split.parse()?,
                file: file.to_string(),
            })
        })
        .collect()
}

pub fn read_index(path: &Path) -> Result<Vec<SampleIndexRow>> {
    parse_index(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Load one sample listed in an index under `dir`.
pub fn load_sample(dir: &Path, row: &SampleIndexRow) -> Result<SixChannelSample> {
    let path = dir.join(&row.file);
    read_sample(&std::fs::read(&path).map_err(|e| Error::io(&path, e))?)
}

/// Assemble and write a sample for every manifest record (optionally one
/// split only) into `out_dir`, plus the index file. Each record's sample seed
/// is derived from `master_seed` and its pair id.
pub fn emit_samples(
    manifest: &PairManifest,
    subtask_dir: &Path,
    out_dir: &Path,
    approach: Approach,
    cfg: &AugmentConfig,
    master_seed: u64,
    only: Option<Split>,
) -> Result<Vec<SampleIndexRow>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let records: Vec<_> = manifest
        .records
        .iter()
        .filter(|r| only.is_none() || r.split == only)
        .collect();
    let rows = records
        .par_iter()
        .map(|r| {
            let split = r
                .split
                .ok_or_else(|| Error::Malformed(format!("pair {} has no split", r.pair_id)))?;
            let original = RasterImage::load(subtask_dir.join(&r.original_path))?;
            let enc_path = subtask_dir.join(&r.encoded_path);
            let mut sample = if r.encoded_path.ends_with(".bin") {
                let blob = std::fs::read(&enc_path).map_err(|e| Error::io(&enc_path, e))?;
                make_sample(&original, EncodedInput::Blob(&blob), approach, cfg, sample_seed(master_seed, r.pair_id))?
            } else {
                let encoded = RasterImage::load(&enc_path)?;
                make_sample(&original, EncodedInput::Image(&encoded), approach, cfg, sample_seed(master_seed, r.pair_id))?
            };
            sample.pair_id = r.pair_id;
            sample.label = Some(r.label);
            let file = format!("{:06}.six", r.pair_id);
            let path = out_dir.join(&file);
            std::fs::write(&path, write_sample(&sample)).map_err(|e| Error::io(&path, e))?;
            Ok(SampleIndexRow {
                pair_id: r.pair_id,
                label: r.label,
                split,
                file,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = out_dir.join(SAMPLE_INDEX_FILE);
    std::fs::write(&index, index_to_csv(&rows)).map_err(|e| Error::io(&index, e))?;
    Ok(rows)
}

/// Run [`histogram_stub_score`] over every sample listed in `dir`'s index.
pub fn stub_scores(dir: &Path, model_id: &str, tile: u32) -> Result<Vec<ScoreRow>> {
    let index = read_index(&dir.join(SAMPLE_INDEX_FILE))?;
    index
        .par_iter()
        .map(|row| {
            let sample = load_sample(dir, row)?;
            Ok(ScoreRow {
                pair_id: row.pair_id,
                model_id: model_id.to_string(),
                score: histogram_stub_score(&sample, tile),
            })
        })
        .collect()
}

pub fn sample_seed(master_seed: u64, pair_id: u64) -> u64 {
    seed::derive(master_seed, "sample", &[pair_id])
}

/// 1.0 when, for every `tile`-sided block, each channel of the original
/// half holds the same multiset of values as the matching encoded channel.
/// Partial blocks at the right and bottom edges are compared too.
pub fn histogram_stub_score(sample: &SixChannelSample, tile: u32) -> f64 {
    let tile = tile.max(1) as usize;
    let (w, h) = (sample.width as usize, sample.height as usize);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for ty in (0..h).step_by(tile) {
        for tx in (0..w).step_by(tile) {
            for c in 0..3 {
                a.clear();
                b.clear();
                for y in ty..(ty + tile).min(h) {
                    for x in tx..(tx + tile).min(w) {
                        let px = &sample.data[(y * w + x) * 6..(y * w + x) * 6 + 6];
                        a.push(px[c].to_bits());
                        b.push(px[c + 3].to_bits());
                    }
                }
                a.sort_unstable();
                b.sort_unstable();
                if a != b {
                    return 0.0;
                }
            }
        }
    }
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(h: u32, w: u32) -> SixChannelSample {
        SixChannelSample {
            height: h,
            width: w,
            data: (0..h * w * 6).map(|i| i as f32 * 0.25 - 3.0).collect(),
            pair_id: 42,
            label: Some(Label::Match),
        }
    }

    #[test]
    fn binary_roundtrip_and_layout() {
        let s = sample(3, 5);
        let bytes = write_sample(&s);
        assert_eq!(bytes.len(), SAMPLE_HEADER_LEN + 3 * 5 * 6 * 4);
        assert_eq!(&bytes[..6], b"SIX1\x01\x01");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 42);
        assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), -3.0);
        assert_eq!(read_sample(&bytes).unwrap(), s);

        let unlabeled = SixChannelSample { label: None, ..s };
        assert_eq!(read_sample(&write_sample(&unlabeled)).unwrap().label, None);
    }

    #[test]
    fn malformed_samples_rejected() {
        let bytes = write_sample(&sample(2, 2));
        assert!(read_sample(&bytes[..20]).is_err());
        assert!(read_sample(&bytes[..bytes.len() - 1]).is_err());
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(read_sample(&b).is_err());
        let mut b = bytes.clone();
        b[4] = 2;
        assert!(read_sample(&b).is_err());
        let mut b = bytes.clone();
        b[16] = 3;
        assert!(read_sample(&b).is_err());
        let mut b = bytes;
        b[5] = 7;
        assert!(read_sample(&b).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let rows = vec![
            SampleIndexRow {
                pair_id: 0,
                label: Label::Match,
                split: Split::Train,
                file: "000000.six".into(),
            },
            SampleIndexRow {
                pair_id: 7,
                label: Label::NonMatch,
                split: Split::Valid,
                file: "000007.six".into(),
            },
        ];
        assert_eq!(parse_index(&index_to_csv(&rows)).unwrap(), rows);
        assert!(parse_index("pair_id,label\n").is_err());
        assert!(parse_index(&format!("{SAMPLE_INDEX_COLUMNS}\n1,2,train,x\n")).is_err());
    }

    #[test]
    fn stub_scorer() {
        // Encoded half = original half with pixels permuted inside 2x2 tiles.
        let (w, h) = (4usize, 4usize);
        let orig: Vec<[f32; 3]> = (0..w * h).map(|i| [i as f32, (i * 7 % 5) as f32, 1.0]).collect();
        let swap = |i: usize| i ^ 1;
        let mut data = Vec::new();
        for i in 0..w * h {
            data.extend_from_slice(&orig[i]);
            data.extend_from_slice(&orig[swap(i)]);
        }
        let mut s = SixChannelSample {
            height: h as u32,
            width: w as u32,
            data,
            pair_id: 0,
            label: None,
        };
        assert_eq!(histogram_stub_score(&s, 2), 1.0);
        s.data[3] += 1.0;
        assert_eq!(histogram_stub_score(&s, 2), 0.0);
    }
}
