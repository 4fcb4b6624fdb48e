//! Binary layouts for ciphertext blobs and key files.
//!
//! Ciphertext blob (all integers little-endian `u64`):
//!
//! ```text
//! "BFV1" | n | q | t | count | count x (c0[0..n], c1[0..n])
//! ```
//!
//! Only degree-1 ciphertexts are stored; relinearize before serializing.
//!
//! Key file: `"BFK1" | n | q | t | T | digits | s | pk0 | pk1 | rlk pairs`,
//! with the ternary secret stored as its residues mod `q`.

use super::params::BfvParams;
use super::poly::{center, reduce_i64};
use super::scheme::{BfvCiphertext, KeyTriple, PublicKey, RelinKey, SecretKey};
use crate::error::{Error, Result};

pub const BLOB_MAGIC: &[u8; 4] = b"BFV1";
pub const KEY_MAGIC: &[u8; 4] = b"BFK1";
/// Magic plus four `u64` fields.
pub const BLOB_HEADER_LEN: usize = 4 + 4 * 8;

/// Parsed blob header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlobHeader {
    pub n: u64,
    pub q: u64,
    pub t: u64,
    pub count: u64,
}

impl BlobHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < BLOB_HEADER_LEN {
            return Err(Error::Malformed(format!(
                "ciphertext blob of {} bytes is shorter than its {BLOB_HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != BLOB_MAGIC {
            return Err(Error::Malformed("ciphertext blob has the wrong magic".into()));
        }
        let mut r = Reader::new(&bytes[4..BLOB_HEADER_LEN]);
        Ok(Self {
            n: r.u64()?,
            q: r.u64()?,
            t: r.u64()?,
            count: r.u64()?,
        })
    }

    /// Payload bytes implied by the header, if representable.
    pub fn payload_len(&self) -> Option<usize> {
        let per = self.n.checked_mul(2 * 8)?;
        usize::try_from(per.checked_mul(self.count)?).ok()
    }
}

/// Serialize degree-1 ciphertexts under `params` into one blob.
pub fn write_blob(params: &BfvParams, cts: &[BfvCiphertext]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(BLOB_HEADER_LEN + cts.len() * 2 * params.n * 8);
    out.extend_from_slice(BLOB_MAGIC);
    for v in [params.n as u64, params.q, params.t, cts.len() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in cts {
        if c.fingerprint != params.fingerprint() {
            return Err(Error::InvalidParameter(
                "ciphertext was produced under different parameters".into(),
            ));
        }
        if c.degree() != 1 {
            return Err(Error::InvalidParameter(
                "only degree-1 ciphertexts can be serialized; relinearize first".into(),
            ));
        }
        for p in &c.polys {
            for &x in p {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parse a blob. The header's `n, q, t` must match `params`.
pub fn read_blob(params: &BfvParams, bytes: &[u8]) -> Result<Vec<BfvCiphertext>> {
    let header = BlobHeader::parse(bytes)?;
    if (header.n, header.q, header.t) != (params.n as u64, params.q, params.t) {
        return Err(Error::Malformed(format!(
            "blob parameters n={} q={} t={} do not match n={} q={} t={}",
            header.n, header.q, header.t, params.n, params.q, params.t
        )));
    }
    let payload = &bytes[BLOB_HEADER_LEN..];
    if header.payload_len() != Some(payload.len()) {
        return Err(Error::Malformed(format!(
            "blob declares {} ciphertexts but carries {} payload bytes",
            header.count,
            payload.len()
        )));
    }
    let mut r = Reader::new(payload);
    let mut cts = Vec::with_capacity(header.count as usize);
    for _ in 0..header.count {
        let polys = (0..2)
            .map(|_| r.poly(params.n, params.q))
            .collect::<Result<Vec<_>>>()?;
        cts.push(BfvCiphertext {
            polys,
            fingerprint: params.fingerprint(),
        });
    }
    Ok(cts)
}

pub fn write_keys(params: &BfvParams, keys: &KeyTriple) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(KEY_MAGIC);
    for v in [
        params.n as u64,
        params.q,
        params.t,
        params.relin_base,
        keys.relin.parts.len() as u64,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut put = |p: &[u64]| p.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    let s: Vec<u64> = keys.secret.coeffs().iter().map(|&x| reduce_i64(x, params.q)).collect();
    put(&s);
    put(&keys.public.p0);
    put(&keys.public.p1);
    for (k0, k1) in &keys.relin.parts {
        put(k0);
        put(k1);
    }
    out
}

pub fn read_keys(bytes: &[u8]) -> Result<(BfvParams, KeyTriple)> {
    if bytes.len() < 4 || &bytes[..4] != KEY_MAGIC {
        return Err(Error::Malformed("key file has the wrong magic".into()));
    }
    let mut r = Reader::new(&bytes[4..]);
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Malformed("ring dimension overflow".into()))?;
    let params = BfvParams::new(n, r.u64()?, r.u64()?, r.u64()?)
        .map_err(|e| Error::Malformed(format!("key file parameters: {e}")))?;
    let digits = r.u64()? as usize;
    if digits != params.relin_digits() {
        return Err(Error::Malformed(format!(
            "key file has {digits} relinearization parts, parameters need {}",
            params.relin_digits()
        )));
    }
    let s_q = r.poly(n, params.q)?;
    let s: Vec<i64> = s_q.iter().map(|&x| center(x, params.q)).collect();
    if s.iter().any(|c| !(-1..=1).contains(c)) {
        return Err(Error::Malformed("secret key is not ternary".into()));
    }
    let p0 = r.poly(n, params.q)?;
    let p1 = r.poly(n, params.q)?;
    let parts = (0..digits)
        .map(|_| Ok((r.poly(n, params.q)?, r.poly(n, params.q)?)))
        .collect::<Result<Vec<_>>>()?;
    if !r.is_empty() {
        return Err(Error::Malformed("trailing bytes after key material".into()));
    }
    Ok((
        params,
        KeyTriple {
            secret: SecretKey::from_coeffs(s),
            public: PublicKey { p0, p1 },
            relin: RelinKey { parts },
        },
    ))
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes }
    }

    fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    fn u64(&mut self) -> Result<u64> {
        if self.bytes.len() < 8 {
            return Err(Error::Malformed("unexpected end of data".into()));
        }
        let (head, rest) = self.bytes.split_at(8);
        self.bytes = rest;
        Ok(u64::from_le_bytes(head.try_into().expect("8 bytes")))
    }

    fn poly(&mut self, n: usize, q: u64) -> Result<Vec<u64>> {
        (0..n)
            .map(|_| {
                let v = self.u64()?;
                if v >= q {
                    return Err(Error::Malformed(format!("coefficient {v} is not reduced mod {q}")));
                }
                Ok(v)
            })
            .collect()
    }
}
