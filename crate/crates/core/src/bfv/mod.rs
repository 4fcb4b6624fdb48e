//! Textbook BFV homomorphic encryption over `Z_q[x]/(x^n + 1)` and the
//! image encryption built on it.

pub mod codec;
pub mod image;
pub mod ntt;
pub mod params;
pub mod poly;
mod scheme;

pub use codec::{read_blob, read_keys, write_blob, write_keys, BlobHeader, BLOB_HEADER_LEN};
pub use image::{ciphertext_to_image, decrypt_image, encrypt_image, pack_image};
pub use params::BfvParams;
pub use scheme::{
    Bfv, BfvCiphertext, KeyTriple, PlaintextPoly, PublicKey, RelinKey, SecretKey,
    MIN_RELIABLE_BUDGET_BITS,
};
