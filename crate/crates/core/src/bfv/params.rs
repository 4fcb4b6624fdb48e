use crate::error::{Error, Result};
use crate::seed;

/// 40-bit prime, `1 mod 2048` (NTT-friendly for n = 1024) and `1 mod 257`.
pub const DEFAULT_Q: u64 = 1_099_498_008_577;
pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_T: u64 = 257;
pub const DEFAULT_RELIN_BASE: u64 = 1 << 8;

/// Bound of the centered-binomial noise distribution.
pub const NOISE_ETA: u32 = 3;

const MAX_N: usize = 1 << 15;
const MAX_Q_BITS: u32 = 50;

/// Ring and modulus parameters of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BfvParams {
    pub n: usize,
    pub q: u64,
    pub t: u64,
    pub relin_base: u64,
}

impl Default for BfvParams {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            q: DEFAULT_Q,
            t: DEFAULT_T,
            relin_base: DEFAULT_RELIN_BASE,
        }
    }
}

impl BfvParams {
    pub fn new(n: usize, q: u64, t: u64, relin_base: u64) -> Result<Self> {
        let p = Self {
            n,
            q,
            t,
            relin_base,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !self.n.is_power_of_two() || self.n < 2 || self.n > MAX_N {
            return bad(format!("ring dimension {} must be a power of two in 2..={MAX_N}", self.n));
        }
        if self.q < 3 || self.q >= 1 << MAX_Q_BITS {
            return bad(format!("ciphertext modulus {} must be in 3..2^{MAX_Q_BITS}", self.q));
        }
        if self.t < 2 || self.t >= self.q {
            return bad(format!("plaintext modulus {} must be in 2..q", self.t));
        }
        if self.relin_base < 2 {
            return bad(format!("relinearization base {} must be >= 2", self.relin_base));
        }
        Ok(())
    }

    /// Scaling factor `floor(q / t)`.
    pub fn delta(&self) -> u64 {
        self.q / self.t
    }

    /// Number of base-`T` digits needed to represent any value below `q`.
    pub fn relin_digits(&self) -> usize {
        let mut count = 0;
        let mut reach: u128 = 1;
        while reach < u128::from(self.q) {
            reach *= u128::from(self.relin_base);
            count += 1;
        }
        count
    }

    /// Whether `q` admits a negacyclic NTT of size `n`.
    pub fn ntt_friendly(&self) -> bool {
        super::ntt::is_prime(self.q) && (self.q - 1) % (2 * self.n as u64) == 0
    }

    /// Stable identifier carried by every ciphertext.
    pub fn fingerprint(&self) -> u64 {
        seed::derive(
            0,
            "bfv-params",
            &[self.n as u64, self.q, self.t, self.relin_base],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = BfvParams::default();
        p.validate().unwrap();
        assert!(p.ntt_friendly());
        assert_eq!(p.q % p.t, 1);
        assert_eq!(64 - p.q.leading_zeros(), 40);
        assert_eq!(p.delta(), p.q / 257);
        // 256^5 = 2^40 > q.
        assert_eq!(p.relin_digits(), 5);
    }

    #[test]
    fn invalid_parameters() {
        assert!(BfvParams::new(1000, DEFAULT_Q, 257, 256).is_err());
        assert!(BfvParams::new(1024, DEFAULT_Q, DEFAULT_Q, 256).is_err());
        assert!(BfvParams::new(1024, DEFAULT_Q, 1, 256).is_err());
        assert!(BfvParams::new(1024, 1 << 51, 257, 256).is_err());
        assert!(BfvParams::new(1024, DEFAULT_Q, 257, 1).is_err());
        assert!(BfvParams::new(16, 12289, 17, 4).is_ok());
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let a = BfvParams::default();
        let b = BfvParams { t: 65537, ..a };
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), BfvParams::default().fingerprint());
    }
}
