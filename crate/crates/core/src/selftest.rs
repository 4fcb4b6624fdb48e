//! Quick invariant checks bundled into the binary, run by `encmatch selftest`.

use rand::Rng;

use crate::augment::{apply_augmentations, horizontal_flip, to_gray, AugmentConfig, OpSet};
use crate::bfv::{self, poly, Bfv, BfvParams, PlaintextPoly};
use crate::chaos::{period, CatMapKey};
use crate::evalkit::{weighted_accuracy, SubmissionFile, Weights};
use crate::pipeline::{decode_fullframe, decode_tiled, encode_fullframe, encode_tiled, TileKeying};
use crate::raster::RasterImage;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    /// `None` on success, otherwise what went wrong.
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

type Check = fn() -> Result<(), String>;

const CHECKS: &[(&str, Check)] = &[
    ("cat-map-bijection", cat_map_bijection),
    ("cat-map-period", cat_map_period),
    ("tiled-roundtrip", tiled_roundtrip),
    ("fullframe-roundtrip", fullframe_roundtrip),
    ("bfv-roundtrip", bfv_roundtrip),
    ("bfv-homomorphic", bfv_homomorphic),
    ("bfv-serialization", bfv_serialization),
    ("augment-invariants", augment_invariants),
    ("evalkit-weights", evalkit_weights),
    ("submission-roundtrip", submission_roundtrip),
];

pub fn run() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| CheckResult {
            name,
            failure: check().err(),
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn noise_image(w: u32, h: u32, s: u64) -> RasterImage {
    let mut rng = seed::rng(s);
    RasterImage::from_fn(w, h, |_, _| rng.random())
}

fn cat_map_bijection() -> Result<(), String> {
    for (n, a, b, k) in [(2, 1, 1, 1), (8, 3, 5, 4), (32, 1, 1, 5), (64, 7, 2, 9)] {
        let key = CatMapKey::new(n, a, b, k).map_err(|e| e.to_string())?;
        let fwd = key.permutation();
        let inv = key.inverse_permutation();
        let mut seen = vec![false; fwd.len()];
        for &p in &fwd {
            seen[p as usize] = true;
        }
        ensure(seen.iter().all(|s| *s), || format!("{key} is not a bijection"))?;
        ensure(fwd.iter().enumerate().all(|(i, &p)| inv[p as usize] as usize == i), || format!("{key} inverse mismatch"))?;
    }
    Ok(())
}

fn cat_map_period() -> Result<(), String> {
    let key = CatMapKey::classic(2, 1).map_err(|e| e.to_string())?;
    let p = period(&key).map_err(|e| e.to_string())?;
    ensure(p == 3, || format!("period of classic map on N=2 is {p}, expected 3"))?;
    let key = CatMapKey::new(32, 2, 3, 1).map_err(|e| e.to_string())?;
    let p = period(&key).map_err(|e| e.to_string())?;
    let full = key.with_iterations(p as u32).map_err(|e| e.to_string())?.permutation();
    ensure(full.iter().enumerate().all(|(i, &v)| v as usize == i), || format!("{key} not identity after {p} steps"))
}

fn tiled_roundtrip() -> Result<(), String> {
    let img = noise_image(128, 128, 1);
    let key = CatMapKey::classic(32, 5).map_err(|e| e.to_string())?;
    for keying in [TileKeying::Shared, TileKeying::PerTile { master_seed: 9 }] {
        let enc = encode_tiled(&img, &key, keying).map_err(|e| e.to_string())?;
        ensure(enc != img, || "tiled encoding left the image unchanged".into())?;
        let dec = decode_tiled(&enc, &key, keying).map_err(|e| e.to_string())?;
        ensure(dec == img, || format!("tiled roundtrip failed ({keying:?})"))?;
    }
    Ok(())
}

fn fullframe_roundtrip() -> Result<(), String> {
    let img = noise_image(64, 64, 2);
    let key = CatMapKey::new(64, 3, 1, 7).map_err(|e| e.to_string())?;
    let enc = encode_fullframe(&img, &key).map_err(|e| e.to_string())?;
    let dec = decode_fullframe(&enc, &key).map_err(|e| e.to_string())?;
    ensure(dec == img, || "full-frame roundtrip failed".into())
}

fn random_plain(params: &BfvParams, s: u64) -> PlaintextPoly {
    let mut rng = seed::rng(s);
    let coeffs = (0..params.n).map(|_| rng.random_range(0..params.t)).collect();
    PlaintextPoly::new(coeffs, params).expect("coefficients below t")
}

fn bfv_roundtrip() -> Result<(), String> {
    let bfv = Bfv::new(BfvParams::default()).map_err(|e| e.to_string())?;
    let keys = bfv.keygen(11);
    for s in 0..4 {
        let m = random_plain(bfv.params(), s);
        let c = bfv.encrypt(&m, &keys.public, 100 + s).map_err(|e| e.to_string())?;
        let d = bfv.decrypt_checked(&c, &keys.secret).map_err(|e| e.to_string())?;
        ensure(d == m, || format!("roundtrip {s} decrypted incorrectly"))?;
    }
    Ok(())
}

fn bfv_homomorphic() -> Result<(), String> {
    let bfv = Bfv::new(BfvParams::default()).map_err(|e| e.to_string())?;
    let p = *bfv.params();
    let keys = bfv.keygen(12);
    let (ma, mb) = (random_plain(&p, 1), random_plain(&p, 2));
    let ca = bfv.encrypt(&ma, &keys.public, 3).map_err(|e| e.to_string())?;
    let cb = bfv.encrypt(&mb, &keys.public, 4).map_err(|e| e.to_string())?;
    let sum = bfv.add(&ca, &cb).map_err(|e| e.to_string())?;
    let got = bfv.decrypt_checked(&sum, &keys.secret).map_err(|e| e.to_string())?;
    ensure(got.coeffs() == poly::add(ma.coeffs(), mb.coeffs(), p.t), || "encrypted sum mismatch".into())?;
    let prod = bfv.multiply_relin(&ca, &cb, &keys.relin).map_err(|e| e.to_string())?;
    let got = bfv.decrypt_checked(&prod, &keys.secret).map_err(|e| e.to_string())?;
    ensure(
        got.coeffs() == poly::schoolbook_negacyclic(ma.coeffs(), mb.coeffs(), p.t),
        || "encrypted product mismatch".into(),
    )
}

fn bfv_serialization() -> Result<(), String> {
    let bfv = Bfv::new(BfvParams::default()).map_err(|e| e.to_string())?;
    let keys = bfv.keygen(13);
    let c = bfv.encrypt(&random_plain(bfv.params(), 5), &keys.public, 6).map_err(|e| e.to_string())?;
    let blob = bfv::write_blob(bfv.params(), std::slice::from_ref(&c)).map_err(|e| e.to_string())?;
    let back = bfv::read_blob(bfv.params(), &blob).map_err(|e| e.to_string())?;
    ensure(back == vec![c], || "ciphertext blob roundtrip mismatch".into())?;
    let (params, keys2) = bfv::read_keys(&bfv::write_keys(bfv.params(), &keys)).map_err(|e| e.to_string())?;
    ensure(params == *bfv.params() && keys2 == keys, || "key file roundtrip mismatch".into())
}

fn augment_invariants() -> Result<(), String> {
    let img = noise_image(24, 16, 3);
    ensure(horizontal_flip(&horizontal_flip(&img)) == img, || "flip is not an involution".into())?;
    let gray = to_gray(&img);
    ensure(
        gray.data().chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2]),
        || "to-gray channels differ".into(),
    )?;
    let off = AugmentConfig {
        probability: 0.0,
        ops: OpSet::Extended,
        ..AugmentConfig::default()
    };
    ensure(apply_augmentations(&img, &off, 1) == img, || "p=0 changed the image".into())?;
    let on = AugmentConfig {
        probability: 1.0,
        ops: OpSet::Extended,
        ..AugmentConfig::default()
    };
    ensure(
        apply_augmentations(&img, &on, 4) == apply_augmentations(&img, &on, 4),
        || "augmentation not deterministic".into(),
    )
}

fn evalkit_weights() -> Result<(), String> {
    let w = Weights::default();
    for (acc, want) in [([1.0, 0.0, 0.0], 0.1), ([0.0, 1.0, 0.0], 0.3), ([0.0, 0.0, 1.0], 0.6)] {
        let got = weighted_accuracy(acc, &w).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("weighted accuracy of {acc:?} is {got}, expected {want}"))?;
    }
    Ok(())
}

fn submission_roundtrip() -> Result<(), String> {
    let text = "1\n0\n1\n";
    let s = SubmissionFile::parse(text, Some(3)).map_err(|e| e.to_string())?;
    ensure(s.emit() == text, || "submission roundtrip mismatch".into())?;
    ensure(SubmissionFile::parse("2\n", None).is_err(), || "accepted an invalid token".into())
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for r in super::run() {
            assert!(r.passed(), "{}: {:?}", r.name, r.failure);
        }
    }
}
