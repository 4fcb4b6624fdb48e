//! Key generation, encryption, decryption and homomorphic evaluation.
//!
//! Textbook BFV over `R_q = Z_q[x]/(x^n + 1)`:
//!
//! * keys: ternary `s`, `pk = (-(a*s + e), a)`, relinearization key
//!   `rlk_i = (-(a_i*s + e_i) + T^i * s^2, a_i)` for each base-`T` digit;
//! * encryption: `(pk0*u + e1 + delta*m, pk1*u + e2)`;
//! * decryption: `round(t/q * [c0 + c1*s (+ c2*s^2)]_q) mod t`;
//! * multiplication: tensor product of the centered lifts over the integers,
//!   scaled by `t/q` and rounded, then optional relinearization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ntt::{mul_mod, NttPlan};
use super::params::{BfvParams, NOISE_ETA};
use super::poly::{self, center, reduce_i128, reduce_i64, ExactMultiplier};
use crate::error::{Error, Result};
use crate::seed;

/// Budgets below this many bits are treated as exhausted by
/// [`Bfv::decrypt_checked`]. At one bit the noise is at most a quarter of
/// `q`, so decryption is still exact.
pub const MIN_RELIABLE_BUDGET_BITS: f64 = 1.0;

/// Plaintext polynomial with coefficients in `[0, t)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlaintextPoly {
    coeffs: Vec<u64>,
}

impl PlaintextPoly {
    pub fn new(coeffs: Vec<u64>, params: &BfvParams) -> Result<Self> {
        if coeffs.len() != params.n {
            return Err(Error::InvalidParameter(format!(
                "plaintext needs {} coefficients, got {}",
                params.n,
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|&&c| c >= params.t) {
            return Err(Error::InvalidParameter(format!(
                "plaintext coefficient {bad} is not below t = {}",
                params.t
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn zero(params: &BfvParams) -> Self {
        Self {
            coeffs: vec![0; params.n],
        }
    }

    /// The constant polynomial `value mod t`.
    pub fn constant(value: u64, params: &BfvParams) -> Self {
        let mut coeffs = vec![0; params.n];
        coeffs[0] = value % params.t;
        Self { coeffs }
    }

    /// `x^degree`, reduced negacyclically.
    pub fn monomial(degree: usize, params: &BfvParams) -> Self {
        let mut coeffs = vec![0; params.n];
        let wraps = (degree / params.n) % 2 == 1;
        coeffs[degree % params.n] = if wraps { params.t - 1 } else { 1 };
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }
}

/// Ternary secret key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    s: Vec<i64>,
}

impl SecretKey {
    pub fn coeffs(&self) -> &[i64] {
        &self.s
    }

    pub(crate) fn from_coeffs(s: Vec<i64>) -> Self {
        Self { s }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) p0: Vec<u64>,
    pub(crate) p1: Vec<u64>,
}

impl PublicKey {
    pub fn polys(&self) -> (&[u64], &[u64]) {
        (&self.p0, &self.p1)
    }
}

/// Relinearization key, one polynomial pair per base-`T` digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelinKey {
    pub(crate) parts: Vec<(Vec<u64>, Vec<u64>)>,
}

impl RelinKey {
    pub fn parts(&self) -> &[(Vec<u64>, Vec<u64>)] {
        &self.parts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTriple {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: RelinKey,
}

/// Ciphertext of degree 1 (two polynomials) or 2 (three polynomials).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfvCiphertext {
    pub(crate) polys: Vec<Vec<u64>>,
    pub(crate) fingerprint: u64,
}

impl BfvCiphertext {
    pub fn degree(&self) -> usize {
        self.polys.len() - 1
    }

    pub fn polys(&self) -> &[Vec<u64>] {
        &self.polys
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

#[derive(Debug, Clone)]
enum RingMul {
    Ntt(NttPlan),
    Crt,
}

/// Scheme instance: validated parameters plus precomputed transforms.
/// Immutable after construction and shareable across threads.
#[derive(Debug, Clone)]
pub struct Bfv {
    params: BfvParams,
    ring: RingMul,
    exact: ExactMultiplier,
}

impl Bfv {
    pub fn new(params: BfvParams) -> Result<Self> {
        params.validate()?;
        let ring = if params.ntt_friendly() {
            RingMul::Ntt(NttPlan::new(params.q, params.n)?)
        } else {
            RingMul::Crt
        };
        Ok(Self {
            params,
            ring,
            exact: ExactMultiplier::new(params.n)?,
        })
    }

    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    /// Whether ring products mod `q` go through an NTT over `q` itself.
    pub fn uses_ntt(&self) -> bool {
        matches!(self.ring, RingMul::Ntt(_))
    }

    /// Negacyclic product mod `q`.
    pub fn mul_q(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        match &self.ring {
            RingMul::Ntt(plan) => plan.multiply(a, b),
            RingMul::Crt => {
                let q = self.params.q;
                let ca: Vec<i64> = a.iter().map(|&x| center(x, q)).collect();
                let cb: Vec<i64> = b.iter().map(|&x| center(x, q)).collect();
                self.exact
                    .multiply(&ca, &cb)
                    .into_iter()
                    .map(|v| reduce_i128(v, q))
                    .collect()
            }
        }
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Vec<u64> {
        (0..self.params.n).map(|_| rng.random_range(0..self.params.q)).collect()
    }

    fn ternary(&self, rng: &mut ChaCha8Rng) -> Vec<i64> {
        (0..self.params.n).map(|_| rng.random_range(-1i64..=1)).collect()
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> Vec<i64> {
        (0..self.params.n)
            .map(|_| {
                let bits: u32 = rng.random();
                let a = (bits & ((1 << NOISE_ETA) - 1)).count_ones() as i64;
                let b = ((bits >> NOISE_ETA) & ((1 << NOISE_ETA) - 1)).count_ones() as i64;
                a - b
            })
            .collect()
    }

    fn lift(&self, a: &[i64]) -> Vec<u64> {
        a.iter().map(|&x| reduce_i64(x, self.params.q)).collect()
    }

    /// Deterministic key generation from `seed`.
    pub fn keygen(&self, seed: u64) -> KeyTriple {
        let q = self.params.q;
        let mut rng = seed::rng(seed::derive(seed, "bfv-keygen", &[]));
        let s = self.ternary(&mut rng);
        let s_q = self.lift(&s);

        let a = self.uniform(&mut rng);
        let e = self.lift(&self.noise(&mut rng));
        let p0 = poly::neg(&poly::add(&self.mul_q(&a, &s_q), &e, q), q);
        let public = PublicKey { p0, p1: a };

        let s2 = self.mul_q(&s_q, &s_q);
        let base = self.params.relin_base;
        let mut power = 1u64;
        let mut parts = Vec::with_capacity(self.params.relin_digits());
        for _ in 0..self.params.relin_digits() {
            let ai = self.uniform(&mut rng);
            let ei = self.lift(&self.noise(&mut rng));
            let mask = poly::neg(&poly::add(&self.mul_q(&ai, &s_q), &ei, q), q);
            let k0 = poly::add(&mask, &poly::scale(&s2, power, q), q);
            parts.push((k0, ai));
            power = mul_mod(power, base % q, q);
        }

        KeyTriple {
            secret: SecretKey { s },
            public,
            relin: RelinKey { parts },
        }
    }

    fn check_plaintext(&self, m: &PlaintextPoly) -> Result<()> {
        if m.coeffs.len() != self.params.n || m.coeffs.iter().any(|&c| c >= self.params.t) {
            return Err(Error::InvalidParameter(
                "plaintext does not match the scheme parameters".into(),
            ));
        }
        Ok(())
    }

    fn check_ciphertext(&self, c: &BfvCiphertext) -> Result<()> {
        if c.fingerprint != self.params.fingerprint() {
            return Err(Error::InvalidParameter(
                "ciphertext was produced under different parameters".into(),
            ));
        }
        if !(2..=3).contains(&c.polys.len()) {
            return Err(Error::InvalidParameter(format!(
                "ciphertext degree {} is not 1 or 2",
                c.polys.len().saturating_sub(1)
            )));
        }
        Ok(())
    }

    fn scaled_message(&self, m: &PlaintextPoly) -> Vec<u64> {
        poly::scale(&m.coeffs, self.params.delta(), self.params.q)
    }

    /// Probabilistic public-key encryption; `seed` drives `u`, `e1`, `e2`.
    pub fn encrypt(&self, m: &PlaintextPoly, pk: &PublicKey, seed: u64) -> Result<BfvCiphertext> {
        self.check_plaintext(m)?;
        let q = self.params.q;
        let mut rng = seed::rng(seed::derive(seed, "bfv-encrypt", &[]));
        let u = self.lift(&self.ternary(&mut rng));
        let e1 = self.lift(&self.noise(&mut rng));
        let e2 = self.lift(&self.noise(&mut rng));
        let c0 = poly::add(
            &poly::add(&self.mul_q(&pk.p0, &u), &e1, q),
            &self.scaled_message(m),
            q,
        );
        let c1 = poly::add(&self.mul_q(&pk.p1, &u), &e2, q);
        Ok(BfvCiphertext {
            polys: vec![c0, c1],
            fingerprint: self.params.fingerprint(),
        })
    }

    /// Noise-free encryption `(delta*m, 0)`. Decrypts under any key; used to
    /// calibrate the noise measurement.
    pub fn encrypt_trivial(&self, m: &PlaintextPoly) -> Result<BfvCiphertext> {
        self.check_plaintext(m)?;
        Ok(BfvCiphertext {
            polys: vec![self.scaled_message(m), vec![0; self.params.n]],
            fingerprint: self.params.fingerprint(),
        })
    }

    /// `[c0 + c1*s (+ c2*s^2)]_q`.
    fn phase(&self, c: &BfvCiphertext, sk: &SecretKey) -> Vec<u64> {
        let q = self.params.q;
        let s_q = self.lift(&sk.s);
        let mut acc = poly::add(&c.polys[0], &self.mul_q(&c.polys[1], &s_q), q);
        if let Some(c2) = c.polys.get(2) {
            let s2 = self.mul_q(&s_q, &s_q);
            acc = poly::add(&acc, &self.mul_q(c2, &s2), q);
        }
        acc
    }

    pub fn decrypt(&self, c: &BfvCiphertext, sk: &SecretKey) -> Result<PlaintextPoly> {
        self.check_ciphertext(c)?;
        let (q, t) = (u128::from(self.params.q), u128::from(self.params.t));
        let coeffs = self
            .phase(c, sk)
            .into_iter()
            .map(|x| (((2 * t * u128::from(x) + q) / (2 * q)) % t) as u64)
            .collect();
        Ok(PlaintextPoly { coeffs })
    }

    /// Decrypt, refusing when the noise budget has fallen below
    /// [`MIN_RELIABLE_BUDGET_BITS`].
    pub fn decrypt_checked(&self, c: &BfvCiphertext, sk: &SecretKey) -> Result<PlaintextPoly> {
        let budget = self.noise_budget(c, sk)?;
        if budget < MIN_RELIABLE_BUDGET_BITS {
            return Err(Error::NoiseBudgetExhausted { bits: budget });
        }
        self.decrypt(c, sk)
    }

    /// Infinity norm of the invariant noise `[t * (c0 + c1*s + ...)]_q`,
    /// floored at 1.
    pub fn noise_norm(&self, c: &BfvCiphertext, sk: &SecretKey) -> Result<u64> {
        self.check_ciphertext(c)?;
        let (q, t) = (self.params.q, self.params.t);
        Ok(self
            .phase(c, sk)
            .into_iter()
            .map(|x| center(mul_mod(x, t, q), q).unsigned_abs())
            .max()
            .unwrap_or(0)
            .max(1))
    }

    /// Remaining headroom `log2(q / (2 * noise))` in bits, clamped at zero.
    pub fn noise_budget(&self, c: &BfvCiphertext, sk: &SecretKey) -> Result<f64> {
        let norm = self.noise_norm(c, sk)?;
        let q = self.params.q as f64;
        Ok((q / (2.0 * norm as f64)).log2().max(0.0))
    }

    pub fn add(&self, a: &BfvCiphertext, b: &BfvCiphertext) -> Result<BfvCiphertext> {
        self.check_ciphertext(a)?;
        self.check_ciphertext(b)?;
        let q = self.params.q;
        let zero = vec![0; self.params.n];
        let len = a.polys.len().max(b.polys.len());
        let polys = (0..len)
            .map(|i| {
                poly::add(
                    a.polys.get(i).unwrap_or(&zero),
                    b.polys.get(i).unwrap_or(&zero),
                    q,
                )
            })
            .collect();
        Ok(BfvCiphertext {
            polys,
            fingerprint: a.fingerprint,
        })
    }

    /// Tensor product of two degree-1 ciphertexts, giving degree 2.
    pub fn multiply(&self, a: &BfvCiphertext, b: &BfvCiphertext) -> Result<BfvCiphertext> {
        self.check_ciphertext(a)?;
        self.check_ciphertext(b)?;
        if a.degree() != 1 || b.degree() != 1 {
            return Err(Error::InvalidParameter(
                "multiplication needs degree-1 ciphertexts; relinearize first".into(),
            ));
        }
        let q = self.params.q;
        let centered = |p: &[u64]| p.iter().map(|&x| center(x, q)).collect::<Vec<i64>>();
        let (a0, a1) = (centered(&a.polys[0]), centered(&a.polys[1]));
        let (b0, b1) = (centered(&b.polys[0]), centered(&b.polys[1]));

        let d0 = self.exact.multiply(&a0, &b0);
        let d1: Vec<i128> = self
            .exact
            .multiply(&a0, &b1)
            .into_iter()
            .zip(self.exact.multiply(&a1, &b0))
            .map(|(x, y)| x + y)
            .collect();
        let d2 = self.exact.multiply(&a1, &b1);

        let polys = [d0, d1, d2]
            .into_iter()
            .map(|d| d.into_iter().map(|x| self.scale_round(x)).collect())
            .collect();
        Ok(BfvCiphertext {
            polys,
            fingerprint: a.fingerprint,
        })
    }

    /// `round(t * x / q) mod q` without overflowing for `|x|` up to 2^121.
    fn scale_round(&self, x: i128) -> u64 {
        let q = i128::from(self.params.q);
        let t = i128::from(self.params.t);
        let whole = x.div_euclid(q);
        let rem = x.rem_euclid(q);
        let frac = (2 * t * rem + q).div_euclid(2 * q);
        reduce_i128(t * whole + frac, self.params.q)
    }

    /// Reduce a degree-2 ciphertext to degree 1. Degree-1 input is returned
    /// unchanged.
    pub fn relinearize(&self, c: &BfvCiphertext, rlk: &RelinKey) -> Result<BfvCiphertext> {
        self.check_ciphertext(c)?;
        if c.degree() == 1 {
            return Ok(c.clone());
        }
        let n = self.params.n;
        if rlk.parts.len() != self.params.relin_digits()
            || rlk.parts.iter().any(|(a, b)| a.len() != n || b.len() != n)
        {
            return Err(Error::InvalidParameter(format!(
                "relinearization key has {} parts, expected {} of length {n}",
                rlk.parts.len(),
                self.params.relin_digits()
            )));
        }
        let q = self.params.q;
        let base = self.params.relin_base;
        let mut rest = c.polys[2].clone();
        let mut c0 = c.polys[0].clone();
        let mut c1 = c.polys[1].clone();
        for (k0, k1) in &rlk.parts {
            let digit: Vec<u64> = rest.iter().map(|&x| x % base).collect();
            rest.iter_mut().for_each(|x| *x /= base);
            c0 = poly::add(&c0, &self.mul_q(k0, &digit), q);
            c1 = poly::add(&c1, &self.mul_q(k1, &digit), q);
        }
        Ok(BfvCiphertext {
            polys: vec![c0, c1],
            fingerprint: c.fingerprint,
        })
    }

    /// Multiply then relinearize.
    pub fn multiply_relin(&self, a: &BfvCiphertext, b: &BfvCiphertext, rlk: &RelinKey) -> Result<BfvCiphertext> {
        self.relinearize(&self.multiply(a, b)?, rlk)
    }

    /// Infinity norm of `pk0 + pk1*s`, centered; equals the key noise.
    pub fn public_key_residual(&self, keys: &KeyTriple) -> u64 {
        let q = self.params.q;
        let s_q = self.lift(&keys.secret.s);
        poly::add(&keys.public.p0, &self.mul_q(&keys.public.p1, &s_q), q)
            .into_iter()
            .map(|x| center(x, q).unsigned_abs())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::poly::schoolbook_negacyclic;

    fn random_plain(bfv: &Bfv, rng: &mut ChaCha8Rng) -> PlaintextPoly {
        let p = bfv.params();
        PlaintextPoly::new((0..p.n).map(|_| rng.random_range(0..p.t)).collect(), p).unwrap()
    }

    fn small() -> Bfv {
        // q = 1 mod 2*64 and prime; small enough for exhaustive checks.
        Bfv::new(BfvParams::new(64, 1_099_498_008_577, 257, 256).unwrap()).unwrap()
    }

    #[test]
    fn keygen_is_deterministic() {
        let bfv = small();
        assert_eq!(bfv.keygen(11), bfv.keygen(11));
        assert_ne!(bfv.keygen(11).secret, bfv.keygen(12).secret);
    }

    #[test]
    fn secret_is_ternary_and_public_key_noise_is_bounded() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let keys = bfv.keygen(1);
        assert!(keys.secret.coeffs().iter().all(|c| (-1..=1).contains(c)));
        let residual = bfv.public_key_residual(&keys);
        assert!(residual <= u64::from(NOISE_ETA), "residual {residual}");
        assert!(residual > 0);
    }

    #[test]
    fn relin_key_encrypts_scaled_square() {
        let bfv = small();
        let keys = bfv.keygen(2);
        let q = bfv.params().q;
        let s_q = bfv.lift(&keys.secret.s);
        let s2 = bfv.mul_q(&s_q, &s_q);
        let mut power = 1u64;
        for (k0, k1) in keys.relin.parts() {
            let phase = poly::add(k0, &bfv.mul_q(k1, &s_q), q);
            let noise = poly::sub(&phase, &poly::scale(&s2, power, q), q);
            assert!(noise.iter().all(|&x| center(x, q).unsigned_abs() <= u64::from(NOISE_ETA)));
            power = mul_mod(power, 256, q);
        }
    }

    #[test]
    fn zero_round_trip_and_probabilistic_encryption() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let keys = bfv.keygen(3);
        let zero = PlaintextPoly::zero(bfv.params());
        let c = bfv.encrypt(&zero, &keys.public, 1).unwrap();
        assert_eq!(bfv.decrypt(&c, &keys.secret).unwrap(), zero);

        let m = PlaintextPoly::constant(200, bfv.params());
        let c1 = bfv.encrypt(&m, &keys.public, 1).unwrap();
        let c2 = bfv.encrypt(&m, &keys.public, 2).unwrap();
        assert_ne!(c1, c2);
        assert_eq!(bfv.decrypt(&c1, &keys.secret).unwrap(), m);
        assert_eq!(bfv.decrypt(&c2, &keys.secret).unwrap(), m);
    }

    #[test]
    fn constant_add_and_multiply() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let p = *bfv.params();
        let keys = bfv.keygen(4);
        let three = bfv.encrypt(&PlaintextPoly::constant(3, &p), &keys.public, 1).unwrap();
        let four = bfv.encrypt(&PlaintextPoly::constant(4, &p), &keys.public, 2).unwrap();
        let sum = bfv.add(&three, &four).unwrap();
        assert_eq!(bfv.decrypt(&sum, &keys.secret).unwrap(), PlaintextPoly::constant(7, &p));
        let prod = bfv.multiply(&three, &four).unwrap();
        assert_eq!(prod.degree(), 2);
        assert_eq!(bfv.decrypt(&prod, &keys.secret).unwrap(), PlaintextPoly::constant(12, &p));
        let relin = bfv.relinearize(&prod, &keys.relin).unwrap();
        assert_eq!(relin.degree(), 1);
        assert_eq!(bfv.decrypt(&relin, &keys.secret).unwrap(), PlaintextPoly::constant(12, &p));
    }

    #[test]
    fn identities() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let p = *bfv.params();
        let keys = bfv.keygen(5);
        let mut rng = seed::rng(5);
        let m = random_plain(&bfv, &mut rng);
        let cm = bfv.encrypt(&m, &keys.public, 1).unwrap();
        let c0 = bfv.encrypt(&PlaintextPoly::zero(&p), &keys.public, 2).unwrap();
        let c1 = bfv.encrypt(&PlaintextPoly::constant(1, &p), &keys.public, 3).unwrap();
        assert_eq!(bfv.decrypt(&bfv.add(&cm, &c0).unwrap(), &keys.secret).unwrap(), m);
        let prod = bfv.multiply_relin(&cm, &c1, &keys.relin).unwrap();
        assert_eq!(bfv.decrypt(&prod, &keys.secret).unwrap(), m);
    }

    #[test]
    fn negacyclic_wraparound() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let p = *bfv.params();
        let keys = bfv.keygen(6);
        let x = bfv.encrypt(&PlaintextPoly::monomial(1, &p), &keys.public, 1).unwrap();
        let y = bfv.encrypt(&PlaintextPoly::monomial(p.n - 1, &p), &keys.public, 2).unwrap();
        let prod = bfv.multiply_relin(&x, &y, &keys.relin).unwrap();
        let expected = PlaintextPoly::constant(p.t - 1, &p);
        assert_eq!(bfv.decrypt(&prod, &keys.secret).unwrap(), expected);
        assert_eq!(PlaintextPoly::monomial(p.n, &p), expected);
    }

    #[test]
    fn random_products_match_plaintext_ring() {
        let bfv = small();
        let p = *bfv.params();
        let keys = bfv.keygen(7);
        let mut rng = seed::rng(7);
        for i in 0..20 {
            let m1 = random_plain(&bfv, &mut rng);
            let m2 = random_plain(&bfv, &mut rng);
            let c1 = bfv.encrypt(&m1, &keys.public, 2 * i).unwrap();
            let c2 = bfv.encrypt(&m2, &keys.public, 2 * i + 1).unwrap();
            let expected = schoolbook_negacyclic(m1.coeffs(), m2.coeffs(), p.t);
            let prod = bfv.multiply(&c1, &c2).unwrap();
            assert_eq!(bfv.decrypt(&prod, &keys.secret).unwrap().coeffs(), &expected[..]);
            let relin = bfv.relinearize(&prod, &keys.relin).unwrap();
            assert_eq!(bfv.decrypt(&relin, &keys.secret).unwrap().coeffs(), &expected[..]);
        }
    }

    #[test]
    fn crt_ring_path_matches_ntt_path() {
        // Same n and t with a q that is not NTT-friendly.
        let crt = Bfv::new(BfvParams::new(64, (1 << 40) - 87, 257, 256).unwrap()).unwrap();
        assert!(!crt.uses_ntt());
        let ntt = small();
        assert!(ntt.uses_ntt());
        let mut rng = seed::rng(8);
        let q = crt.params().q;
        let a: Vec<u64> = (0..64).map(|_| rng.random_range(0..q)).collect();
        let b: Vec<u64> = (0..64).map(|_| rng.random_range(0..q)).collect();
        assert_eq!(crt.mul_q(&a, &b), schoolbook_negacyclic(&a, &b, q));

        let keys = crt.keygen(1);
        let m1 = random_plain(&crt, &mut rng);
        let m2 = random_plain(&crt, &mut rng);
        let c1 = crt.encrypt(&m1, &keys.public, 1).unwrap();
        let c2 = crt.encrypt(&m2, &keys.public, 2).unwrap();
        let prod = crt.multiply_relin(&c1, &c2, &keys.relin).unwrap();
        assert_eq!(
            crt.decrypt(&prod, &keys.secret).unwrap().coeffs(),
            &schoolbook_negacyclic(m1.coeffs(), m2.coeffs(), 257)[..]
        );
    }

    #[test]
    fn trivial_encryption_budget_formula() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let p = *bfv.params();
        let keys = bfv.keygen(9);
        // q = 1 mod t, so t * delta * 1 = -1 mod q and the noise norm is 1.
        let c = bfv.encrypt_trivial(&PlaintextPoly::constant(1, &p)).unwrap();
        assert_eq!(bfv.noise_norm(&c, &keys.secret).unwrap(), 1);
        let expected = (p.q as f64 / 2.0).log2();
        assert!((bfv.noise_budget(&c, &keys.secret).unwrap() - expected).abs() < 1e-12);
        assert_eq!(bfv.decrypt(&c, &keys.secret).unwrap(), PlaintextPoly::constant(1, &p));
    }

    #[test]
    fn budget_shrinks_under_evaluation() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let keys = bfv.keygen(10);
        let mut rng = seed::rng(10);
        let m = random_plain(&bfv, &mut rng);
        let c = bfv.encrypt(&m, &keys.public, 1).unwrap();
        let fresh = bfv.noise_budget(&c, &keys.secret).unwrap();
        assert!(fresh > 10.0, "fresh budget {fresh}");
        // Doubling a ciphertext doubles its noise.
        let doubled = bfv.add(&c, &c).unwrap();
        let after_add = bfv.noise_budget(&doubled, &keys.secret).unwrap();
        assert!(after_add <= fresh);
        let sq = bfv.multiply_relin(&c, &c, &keys.relin).unwrap();
        assert!(bfv.noise_budget(&sq, &keys.secret).unwrap() < fresh);
    }

    #[test]
    fn repeated_squaring_exhausts_budget_and_is_flagged() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let p = *bfv.params();
        let keys = bfv.keygen(11);
        let mut rng = seed::rng(11);
        let m = random_plain(&bfv, &mut rng);
        let mut c = bfv.encrypt(&m, &keys.public, 1).unwrap();
        let mut plain = m.coeffs().to_vec();
        let mut last = bfv.noise_budget(&c, &keys.secret).unwrap();
        for _ in 0..6 {
            c = bfv.multiply_relin(&c, &c, &keys.relin).unwrap();
            plain = schoolbook_negacyclic(&plain, &plain, p.t);
            let budget = bfv.noise_budget(&c, &keys.secret).unwrap();
            if budget >= MIN_RELIABLE_BUDGET_BITS {
                assert!(budget < last);
                assert_eq!(bfv.decrypt_checked(&c, &keys.secret).unwrap().coeffs(), &plain[..]);
                last = budget;
                continue;
            }
            assert!(matches!(
                bfv.decrypt_checked(&c, &keys.secret),
                Err(Error::NoiseBudgetExhausted { .. })
            ));
            assert_ne!(bfv.decrypt(&c, &keys.secret).unwrap().coeffs(), &plain[..]);
            return;
        }
        panic!("budget never ran out");
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let bfv = Bfv::new(BfvParams::default()).unwrap();
        let other = small();
        let keys = bfv.keygen(12);
        let okeys = other.keygen(12);
        let c = bfv.encrypt(&PlaintextPoly::zero(bfv.params()), &keys.public, 1).unwrap();
        let oc = other.encrypt(&PlaintextPoly::zero(other.params()), &okeys.public, 1).unwrap();
        assert!(bfv.add(&c, &oc).is_err());
        let sq = bfv.multiply(&c, &c).unwrap();
        assert!(bfv.multiply(&sq, &c).is_err());
        assert!(PlaintextPoly::new(vec![300; 1024], bfv.params()).is_err());
        assert!(PlaintextPoly::new(vec![0; 10], bfv.params()).is_err());
        assert!(bfv.relinearize(&sq, &okeys.relin).is_err());
    }
}
