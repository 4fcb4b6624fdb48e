//! Seed derivation. Every randomized step receives its own stream derived
//! from a master seed and a list of labels, so results do not depend on the
//! order (or thread) in which items are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hash a master seed together with a domain tag and integer path into a
/// 64-bit child seed.
pub fn derive(master: u64, domain: &str, path: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    for p in path {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of a byte string; used for reproducibility checks.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_label_sensitive() {
        assert_eq!(derive(7, "pair", &[1]), derive(7, "pair", &[1]));
        assert_ne!(derive(7, "pair", &[1]), derive(7, "pair", &[2]));
        assert_ne!(derive(7, "pair", &[1]), derive(7, "tile", &[1]));
        assert_ne!(derive(7, "pair", &[1]), derive(8, "pair", &[1]));
    }

    #[test]
    fn sha256_of_empty() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
