//! Pair-corpus construction: matching pairs from the encoders, non-matching
//! pairs by re-assigning encodings, stratified train/validation splits, and
//! the manifest ledger.
//!
//! On disk a corpus lives under `<root>/<subtask>/`:
//!
//! ```text
//! originals/000000.png ...
//! encoded/000000.png ...     (encoded/000000.bin for the encrypted subtask)
//! manifest.csv
//! keys.bfk                   (encrypted subtask only)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::ImageFormat;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::bfv::{self, Bfv, BfvParams, KeyTriple};
use crate::chaos::CatMapKey;
use crate::error::{Error, Result};
use crate::pipeline::{self, CropBox, TileKeying, FRAME_SIDE, TILE_SIDE};
use crate::raster::RasterImage;
use crate::seed;
use crate::synth::{self, SizeRange};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const KEYS_FILE: &str = "keys.bfk";
pub const MANIFEST_COLUMNS: &str = "pair_id,subtask,original_path,encoded_path,label,split";
pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subtask {
    /// Tile-wise cat-map scrambling of 512x512 frames.
    Tiled = 1,
    /// Full-frame cat-map scrambling of 512x512 frames.
    FullFrame = 2,
    /// Homomorphic encryption of 52x52 face crops.
    Encrypted = 3,
}

impl Subtask {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Subtask::Tiled),
            2 => Ok(Subtask::FullFrame),
            3 => Ok(Subtask::Encrypted),
            _ => Err(Error::InvalidParameter(format!("subtask must be 1, 2 or 3, got {n}"))),
        }
    }
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonMatch = 0,
    Match = 1,
}

impl Label {
    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::NonMatch),
            1 => Ok(Label::Match),
            _ => Err(Error::Malformed(format!("label must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            _ => Err(Error::Malformed(format!("split must be train or valid, got `{s}`"))),
        }
    }
}

/// One row of the manifest. Paths are relative to the subtask directory.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairRecord {
    pub pair_id: u64,
    pub subtask: Subtask,
    pub original_path: String,
    pub encoded_path: String,
    pub label: Label,
    /// `None` until [`split`] has assigned the record.
    pub split: Option<Split>,
}

/// Where an original image comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Synthetic { seed: u64 },
    File(PathBuf),
}

impl Source {
    pub fn load(&self, subtask: Subtask) -> Result<RasterImage> {
        match self {
            Source::Synthetic { seed } => {
                let sizes = match subtask {
                    Subtask::Encrypted => SizeRange::FACE,
                    _ => SizeRange::FRAME,
                };
                Ok(synth::synthetic_image(*seed, sizes))
            }
            Source::File(path) => RasterImage::load(path),
        }
    }
}

/// `count` synthetic sources with seeds derived from `master_seed`.
pub fn synthetic_sources(count: usize, master_seed: u64) -> Vec<Source> {
    (0..count as u64)
        .map(|i| Source::Synthetic {
            seed: seed::derive(master_seed, "original", &[i]),
        })
        .collect()
}

/// Every PNG/PPM/PNM/JPEG file directly inside `dir`, sorted by name.
pub fn folder_sources(dir: &Path) -> Result<Vec<Source>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "ppm" | "pnm" | "jpg" | "jpeg")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files.into_iter().map(Source::File).collect())
}

/// Output of an encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoded {
    Image(RasterImage),
    Blob(Vec<u8>),
}

impl Encoded {
    pub fn extension(&self) -> &'static str {
        match self {
            Encoded::Image(_) => "png",
            Encoded::Blob(_) => "bin",
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Encoded::Image(img) => img.encode(ImageFormat::Png),
            Encoded::Blob(b) => Ok(b.clone()),
        }
    }
}

/// A configured subtask encoder.
#[derive(Debug, Clone)]
pub enum Encoder {
    Tiled { key: CatMapKey, keying: TileKeying },
    FullFrame { key: CatMapKey },
    Encrypted { bfv: Bfv, keys: Box<KeyTriple> },
}

impl Encoder {
    /// Default key for tile-wise scrambling.
    pub fn default_tiled_key() -> CatMapKey {
        CatMapKey::classic(TILE_SIDE, 5).expect("valid constant key")
    }

    pub fn default_fullframe_key() -> CatMapKey {
        CatMapKey::classic(FRAME_SIDE, 7).expect("valid constant key")
    }

    /// Default encoder for a subtask; encryption keys come from `master_seed`.
    pub fn default_for(subtask: Subtask, master_seed: u64) -> Result<Self> {
        Ok(match subtask {
            Subtask::Tiled => Encoder::Tiled {
                key: Self::default_tiled_key(),
                keying: TileKeying::Shared,
            },
            Subtask::FullFrame => Encoder::FullFrame {
                key: Self::default_fullframe_key(),
            },
            Subtask::Encrypted => Self::encrypted(BfvParams::default(), master_seed)?,
        })
    }

    pub fn encrypted(params: BfvParams, master_seed: u64) -> Result<Self> {
        let bfv = Bfv::new(params)?;
        let keys = bfv.keygen(seed::derive(master_seed, "bfv-keys", &[]));
        Ok(Encoder::Encrypted {
            bfv,
            keys: Box::new(keys),
        })
    }

    pub fn subtask(&self) -> Subtask {
        match self {
            Encoder::Tiled { .. } => Subtask::Tiled,
            Encoder::FullFrame { .. } => Subtask::FullFrame,
            Encoder::Encrypted { .. } => Subtask::Encrypted,
        }
    }

    /// Geometry normalization applied to an original before encoding; the
    /// result is what gets stored as the pair's original.
    pub fn prepare(&self, img: &RasterImage) -> Result<RasterImage> {
        match self {
            Encoder::Tiled { .. } | Encoder::FullFrame { .. } => {
                pipeline::normalize_geometry(img, FRAME_SIDE)
            }
            Encoder::Encrypted { .. } => {
                pipeline::prepare_face_crop(img, CropBox::centered_square(img.width(), img.height()))
            }
        }
    }

    /// Encode a prepared original. `item_seed` drives encryption randomness.
    pub fn encode(&self, prepared: &RasterImage, item_seed: u64) -> Result<Encoded> {
        match self {
            Encoder::Tiled { key, keying } => {
                pipeline::encode_tiled(prepared, key, *keying).map(Encoded::Image)
            }
            Encoder::FullFrame { key } => pipeline::encode_fullframe(prepared, key).map(Encoded::Image),
            Encoder::Encrypted { bfv, keys } => {
                bfv::encrypt_image(bfv, prepared, &keys.public, item_seed).map(Encoded::Blob)
            }
        }
    }

    /// One-line description stored in the manifest header.
    pub fn describe(&self) -> String {
        match self {
            Encoder::Tiled { key, keying } => match keying {
                TileKeying::Shared => format!("key={key} keying=shared"),
                TileKeying::PerTile { master_seed } => {
                    format!("key={key} keying=per-tile:{master_seed}")
                }
            },
            Encoder::FullFrame { key } => format!("key={key}"),
            Encoder::Encrypted { bfv, .. } => {
                let p = bfv.params();
                format!("bfv=n:{},q:{},t:{},T:{}", p.n, p.q, p.t, p.relin_base)
            }
        }
    }
}

fn item_name(pair_id: u64) -> String {
    format!("{pair_id:06}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Encode every source and write the pair files under `subtask_dir`.
/// Returns one label-1 record per source, pair ids `0..sources.len()`.
pub fn build_matching(
    sources: &[Source],
    encoder: &Encoder,
    subtask_dir: &Path,
    master_seed: u64,
) -> Result<Vec<PairRecord>> {
    let subtask = encoder.subtask();
    create_dir(&subtask_dir.join("originals"))?;
    create_dir(&subtask_dir.join("encoded"))?;
    sources
        .par_iter()
        .enumerate()
        .map(|(i, source)| {
            let pair_id = i as u64;
            let name = item_name(pair_id);
            let source_path = match source {
                Source::File(p) => p.clone(),
                Source::Synthetic { seed } => PathBuf::from(format!("synthetic:{seed}")),
            };
            let wrap = |e: Error| Error::Encoder {
                path: source_path.clone(),
                source: Box::new(e),
            };
            let original = encoder.prepare(&source.load(subtask).map_err(wrap)?).map_err(wrap)?;
            let encoded = encoder
                .encode(&original, seed::derive(master_seed, "pair", &[pair_id]))
                .map_err(wrap)?;
            let original_path = format!("originals/{name}.png");
            let encoded_path = format!("encoded/{name}.{}", encoded.extension());
            write_file(&subtask_dir.join(&original_path), &original.encode(ImageFormat::Png)?)?;
            write_file(&subtask_dir.join(&encoded_path), &encoded.to_bytes()?)?;
            Ok(PairRecord {
                pair_id,
                subtask,
                original_path,
                encoded_path,
                label: Label::Match,
                split: None,
            })
        })
        .collect()
}

/// How non-matching encodings are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonMatchMode {
    /// Each original independently draws one of the other encodings; an
    /// encoding may be used several times.
    #[default]
    WithReplacement,
    /// A uniformly random derangement: every encoding is used exactly once.
    Derangement,
}

/// One label-0 record per matching record, pairing its original with the
/// encoding of a different original. Pair ids continue after the largest
/// matching id.
pub fn build_nonmatching(matching: &[PairRecord], master_seed: u64, mode: NonMatchMode) -> Result<Vec<PairRecord>> {
    let n = matching.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "non-matching pairs need at least 2 originals, got {n}"
        )));
    }
    let first_id = matching.iter().map(|r| r.pair_id).max().unwrap_or(0) + 1;
    let partner: Vec<usize> = match mode {
        NonMatchMode::WithReplacement => (0..n)
            .map(|i| {
                let mut rng = seed::rng(seed::derive(master_seed, "nonmatch", &[i as u64]));
                let r = rng.random_range(0..n - 1);
                if r >= i {
                    r + 1
                } else {
                    r
                }
            })
            .collect(),
        NonMatchMode::Derangement => {
            let mut rng = seed::rng(seed::derive(master_seed, "derangement", &[]));
            let mut perm: Vec<usize> = (0..n).collect();
            loop {
                perm.shuffle(&mut rng);
                if perm.iter().enumerate().all(|(i, &j)| i != j) {
                    break perm;
                }
            }
        }
    };
    Ok(matching
        .iter()
        .zip(partner)
        .enumerate()
        .map(|(i, (rec, j))| PairRecord {
            pair_id: first_id + i as u64,
            subtask: rec.subtask,
            original_path: rec.original_path.clone(),
            encoded_path: matching[j].encoded_path.clone(),
            label: Label::NonMatch,
            split: None,
        })
        .collect())
}

/// Number of training records for a class of `size` at `ratio`.
pub fn train_count(size: usize, ratio: f64) -> usize {
    ((ratio * size as f64) + 1e-9).floor().min(size as f64) as usize
}

/// Stratified split: within each label class, a seeded shuffle puts the
/// first `floor(ratio * size)` records in train and the rest in valid.
/// Output is sorted by pair id.
pub fn split(mut records: Vec<PairRecord>, ratio: f64, master_seed: u64) -> Result<Vec<PairRecord>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!("split ratio {ratio} is outside [0, 1]")));
    }
    records.sort_by_key(|r| r.pair_id);
    for label in [Label::NonMatch, Label::Match] {
        let mut idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].label == label).collect();
        let mut rng = seed::rng(seed::derive(master_seed, "split", &[u64::from(label.value())]));
        idx.shuffle(&mut rng);
        let cut = train_count(idx.len(), ratio);
        for (rank, &i) in idx.iter().enumerate() {
            records[i].split = Some(if rank < cut { Split::Train } else { Split::Valid });
        }
    }
    Ok(records)
}

/// Record counts per label and split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ManifestCounts {
    pub match_train: usize,
    pub match_valid: usize,
    pub nonmatch_train: usize,
    pub nonmatch_valid: usize,
}

impl ManifestCounts {
    pub fn total(&self) -> usize {
        self.match_train + self.match_valid + self.nonmatch_train + self.nonmatch_valid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairManifest {
    pub subtask: Subtask,
    pub master_seed: u64,
    /// Encoder description, informational.
    pub encoder: String,
    pub records: Vec<PairRecord>,
}

impl PairManifest {
    pub fn counts(&self) -> ManifestCounts {
        let mut c = ManifestCounts::default();
        for r in &self.records {
            match (r.label, r.split) {
                (Label::Match, Some(Split::Train)) => c.match_train += 1,
                (Label::Match, Some(Split::Valid)) => c.match_valid += 1,
                (Label::NonMatch, Some(Split::Train)) => c.nonmatch_train += 1,
                (Label::NonMatch, Some(Split::Valid)) => c.nonmatch_valid += 1,
                _ => {}
            }
        }
        c
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &PairRecord> {
        self.records.iter().filter(move |r| r.split == Some(split))
    }

    /// Non-matching records whose encoding is their own original's.
    pub fn self_pairings(&self) -> usize {
        let own: BTreeMap<&str, &str> = self
            .records
            .iter()
            .filter(|r| r.label == Label::Match)
            .map(|r| (r.original_path.as_str(), r.encoded_path.as_str()))
            .collect();
        self.records
            .iter()
            .filter(|r| r.label == Label::NonMatch && own.get(r.original_path.as_str()) == Some(&r.encoded_path.as_str()))
            .count()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "# encmatch-manifest subtask={} master_seed={} encoder={}\n{MANIFEST_COLUMNS}\n",
            self.subtask, self.master_seed, self.encoder
        );
        for r in &self.records {
            for p in [&r.original_path, &r.encoded_path] {
                if p.contains([',', '\n', '\r']) {
                    return Err(Error::InvalidParameter(format!("path `{p}` cannot be stored in the manifest")));
                }
            }
            let split = r.split.ok_or_else(|| {
                Error::InvalidParameter(format!("pair {} has not been assigned a split", r.pair_id))
            })?;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.pair_id,
                r.subtask,
                r.original_path,
                r.encoded_path,
                r.label.value(),
                split
            ));
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: String| Error::Malformed(format!("manifest line {}: {msg}", line + 1));
        let (_, header) = lines.next().ok_or_else(|| Error::Malformed("empty manifest".into()))?;
        let meta = header
            .strip_prefix("# encmatch-manifest ")
            .ok_or_else(|| bad(0, "missing manifest header".into()))?;
        let (mut subtask, mut master_seed, mut encoder) = (None, None, String::new());
        let mut rest = meta;
        while !rest.is_empty() {
            let (name, tail) = rest
                .split_once('=')
                .ok_or_else(|| bad(0, format!("bad header field `{rest}`")))?;
            // The encoder description runs to the end of the line.
            if name == "encoder" {
                encoder = tail.to_string();
                break;
            }
            let (value, tail) = tail.split_once(' ').unwrap_or((tail, ""));
            match name {
                "subtask" => {
                    let n: u8 = value.parse().map_err(|_| bad(0, format!("bad subtask `{value}`")))?;
                    subtask = Some(Subtask::from_number(n)?);
                }
                "master_seed" => {
                    master_seed = Some(value.parse().map_err(|_| bad(0, format!("bad seed `{value}`")))?)
                }
                other => return Err(bad(0, format!("unknown header field `{other}`"))),
            }
            rest = tail;
        }
        let subtask = subtask.ok_or_else(|| bad(0, "header lacks subtask".into()))?;
        let master_seed = master_seed.ok_or_else(|| bad(0, "header lacks master_seed".into()))?;
        match lines.next() {
            Some((_, cols)) if cols == MANIFEST_COLUMNS => {}
            _ => return Err(bad(1, format!("expected column line `{MANIFEST_COLUMNS}`"))),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i, format!("expected 6 fields, got {}", f.len())));
            }
            let pair_id = f[0].parse().map_err(|_| bad(i, format!("bad pair id `{}`", f[0])))?;
            let st: u8 = f[1].parse().map_err(|_| bad(i, format!("bad subtask `{}`", f[1])))?;
            let label: u8 = f[4].parse().map_err(|_| bad(i, format!("bad label `{}`", f[4])))?;
            records.push(PairRecord {
                pair_id,
                subtask: Subtask::from_number(st)?,
                original_path: f[2].to_string(),
                encoded_path: f[3].to_string(),
                label: Label::from_value(label).map_err(|e| bad(i, e.to_string()))?,
                split: Some(f[5].parse().map_err(|e: Error| bad(i, e.to_string()))?),
            });
        }
        Ok(Self {
            subtask,
            master_seed,
            encoder,
            records,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Everything needed to build one subtask corpus.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub encoder: Encoder,
    pub sources: Vec<Source>,
    pub master_seed: u64,
    pub train_ratio: f64,
    pub nonmatch: NonMatchMode,
}

impl DatasetConfig {
    /// Synthetic originals with the default encoder for `subtask`.
    pub fn synthetic(subtask: Subtask, count: usize, master_seed: u64) -> Result<Self> {
        Ok(Self {
            encoder: Encoder::default_for(subtask, master_seed)?,
            sources: synthetic_sources(count, master_seed),
            master_seed,
            train_ratio: DEFAULT_TRAIN_RATIO,
            nonmatch: NonMatchMode::default(),
        })
    }
}

/// Directory of a subtask corpus under `root`.
pub fn subtask_dir(root: &Path, subtask: Subtask) -> PathBuf {
    root.join(subtask.to_string())
}

/// Build a corpus under `<root>/<subtask>/` and write its manifest.
pub fn build_dataset(root: &Path, config: &DatasetConfig) -> Result<PairManifest> {
    let subtask = config.encoder.subtask();
    let dir = subtask_dir(root, subtask);
    let matching = build_matching(&config.sources, &config.encoder, &dir, config.master_seed)?;
    let nonmatching = build_nonmatching(&matching, config.master_seed, config.nonmatch)?;
    let records = split(
        matching.into_iter().chain(nonmatching).collect(),
        config.train_ratio,
        config.master_seed,
    )?;
    if let Encoder::Encrypted { bfv, keys } = &config.encoder {
        write_file(&dir.join(KEYS_FILE), &bfv::write_keys(bfv.params(), keys))?;
    }
    let manifest = PairManifest {
        subtask,
        master_seed: config.master_seed,
        encoder: config.encoder.describe(),
        records,
    };
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn tree_hashes(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else {
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let rel = path.strip_prefix(base).unwrap_or(&path).to_string_lossy().replace('\\', "/");
                out.insert(rel, seed::sha256_hex(&bytes));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fake_matching(n: usize) -> Vec<PairRecord> {
        (0..n as u64)
            .map(|i| PairRecord {
                pair_id: i,
                subtask: Subtask::Tiled,
                original_path: format!("originals/{}.png", item_name(i)),
                encoded_path: format!("encoded/{}.png", item_name(i)),
                label: Label::Match,
                split: None,
            })
            .collect()
    }

    fn manifest(records: Vec<PairRecord>) -> PairManifest {
        PairManifest {
            subtask: Subtask::Tiled,
            master_seed: 3,
            encoder: "key=N=32,a=1,b=1,k=5 keying=shared".into(),
            records,
        }
    }

    #[test]
    fn nonmatching_never_self_pairs() {
        for mode in [NonMatchMode::WithReplacement, NonMatchMode::Derangement] {
            let m = fake_matching(50);
            let nm = build_nonmatching(&m, 9, mode).unwrap();
            assert_eq!(nm.len(), 50);
            for (a, b) in m.iter().zip(&nm) {
                assert_eq!(a.original_path, b.original_path);
                assert_ne!(a.encoded_path, b.encoded_path);
                assert_eq!(b.label, Label::NonMatch);
                assert_eq!(b.pair_id, 50 + a.pair_id);
            }
            assert_eq!(nm, build_nonmatching(&m, 9, mode).unwrap());
        }
    }

    #[test]
    fn derangement_uses_every_encoding_once() {
        let m = fake_matching(30);
        let nm = build_nonmatching(&m, 4, NonMatchMode::Derangement).unwrap();
        let mut used: Vec<_> = nm.iter().map(|r| r.encoded_path.clone()).collect();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 30);
    }

    #[test]
    fn nonmatching_needs_two_originals() {
        assert!(build_nonmatching(&fake_matching(1), 0, NonMatchMode::WithReplacement).is_err());
        let two = build_nonmatching(&fake_matching(2), 0, NonMatchMode::WithReplacement).unwrap();
        assert_eq!(two[0].encoded_path, fake_matching(2)[1].encoded_path);
    }

    #[test]
    fn ten_thousand_originals() {
        let m = fake_matching(10_000);
        let nm = build_nonmatching(&m, 1, NonMatchMode::WithReplacement).unwrap();
        assert_eq!(nm.len(), 10_000);
        let records = split(m.into_iter().chain(nm).collect(), 0.8, 1).unwrap();
        let c = manifest(records).counts();
        assert_eq!(
            c,
            ManifestCounts {
                match_train: 8000,
                match_valid: 2000,
                nonmatch_train: 8000,
                nonmatch_valid: 2000
            }
        );
    }

    #[test]
    fn split_edge_ratios_and_seeds() {
        let m = fake_matching(40);
        let nm = build_nonmatching(&m, 1, NonMatchMode::WithReplacement).unwrap();
        let all: Vec<_> = m.into_iter().chain(nm).collect();
        let full = split(all.clone(), 1.0, 5).unwrap();
        assert!(full.iter().all(|r| r.split == Some(Split::Train)));
        let none = split(all.clone(), 0.0, 5).unwrap();
        assert!(none.iter().all(|r| r.split == Some(Split::Valid)));
        let a = split(all.clone(), 0.8, 5).unwrap();
        let b = split(all.clone(), 0.8, 6).unwrap();
        assert_ne!(a, b);
        assert_eq!(manifest(a).counts(), manifest(b).counts());
        assert!(split(all, 1.5, 5).is_err());
    }

    #[test]
    fn manifest_text_round_trip() {
        let m = fake_matching(6);
        let nm = build_nonmatching(&m, 2, NonMatchMode::WithReplacement).unwrap();
        let man = manifest(split(m.into_iter().chain(nm).collect(), 0.8, 2).unwrap());
        let text = man.to_csv().unwrap();
        assert!(text.starts_with("# encmatch-manifest subtask=1 master_seed=3 encoder=key=N=32"));
        assert_eq!(text.lines().nth(1).unwrap(), MANIFEST_COLUMNS);
        assert_eq!(PairManifest::parse(&text).unwrap(), man);
        assert_eq!(man.self_pairings(), 0);
    }

    #[test]
    fn manifest_parse_errors() {
        assert!(PairManifest::parse("").is_err());
        assert!(PairManifest::parse("pair_id,subtask\n").is_err());
        let head = "# encmatch-manifest subtask=1 master_seed=3 encoder=x\n";
        assert!(PairManifest::parse(&format!("{head}wrong,columns\n")).is_err());
        let ok = format!("{head}{MANIFEST_COLUMNS}\n0,1,a.png,b.png,1,train\n");
        assert_eq!(PairManifest::parse(&ok).unwrap().records.len(), 1);
        for bad in ["0,1,a.png,b.png,2,train", "0,1,a.png,b.png,1,test", "x,1,a.png,b.png,1,train", "0,1,a.png,1,train"] {
            assert!(PairManifest::parse(&format!("{head}{MANIFEST_COLUMNS}\n{bad}\n")).is_err(), "{bad}");
        }
    }

    #[test]
    fn unsplit_records_cannot_be_written() {
        assert!(manifest(fake_matching(2)).to_csv().is_err());
    }

    proptest! {
        #[test]
        fn split_counts_are_exact(n in 2usize..300, ratio in 0.0f64..=1.0, seed in any::<u64>()) {
            let m = fake_matching(n);
            let nm = build_nonmatching(&m, seed, NonMatchMode::WithReplacement).unwrap();
            let c = manifest(split(m.into_iter().chain(nm).collect(), ratio, seed).unwrap()).counts();
            let train = train_count(n, ratio);
            prop_assert!(train as f64 <= ratio * n as f64 + 1e-6);
            prop_assert!(ratio * n as f64 - 1.0 < train as f64 + 1e-6);
            prop_assert_eq!(c.match_train, train);
            prop_assert_eq!(c.nonmatch_train, train);
            prop_assert_eq!(c.match_valid, n - train);
            prop_assert_eq!(c.nonmatch_valid, n - train);
        }
    }
}
