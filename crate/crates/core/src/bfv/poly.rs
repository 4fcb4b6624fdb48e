//! Coefficient-vector arithmetic in `Z_m[x]/(x^n + 1)`.

use super::ntt::{add_mod, mul_mod, sub_mod, NttPlan};
use crate::error::Result;

pub fn add(a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| add_mod(x, y, m)).collect()
}

pub fn sub(a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| sub_mod(x, y, m)).collect()
}

pub fn neg(a: &[u64], m: u64) -> Vec<u64> {
    a.iter().map(|&x| sub_mod(0, x, m)).collect()
}

pub fn scale(a: &[u64], s: u64, m: u64) -> Vec<u64> {
    a.iter().map(|&x| mul_mod(x, s, m)).collect()
}

/// Representative of `x mod m` in `(-m/2, m/2]`.
#[inline]
pub fn center(x: u64, m: u64) -> i64 {
    if x > m / 2 {
        -((m - x) as i64)
    } else {
        x as i64
    }
}

/// Reduce a signed integer into `[0, m)`.
#[inline]
pub fn reduce_i64(x: i64, m: u64) -> u64 {
    x.rem_euclid(m as i64) as u64
}

#[inline]
pub fn reduce_i128(x: i128, m: u64) -> u64 {
    x.rem_euclid(i128::from(m)) as u64
}

/// Quadratic-time negacyclic product mod `m`. Independent of the NTT and
/// used as the reference it is checked against.
pub fn schoolbook_negacyclic(a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
    let n = a.len();
    assert_eq!(n, b.len());
    let mut pos = vec![0u128; n];
    let mut negs = vec![0u128; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let p = u128::from(x) * u128::from(y) % u128::from(m);
            if i + j < n {
                pos[i + j] += p;
            } else {
                negs[i + j - n] += p;
            }
        }
    }
    pos.into_iter()
        .zip(negs)
        .map(|(p, q)| {
            let (p, q) = ((p % u128::from(m)) as u64, (q % u128::from(m)) as u64);
            sub_mod(p, q, m)
        })
        .collect()
}

/// Quadratic-time negacyclic product over the integers.
pub fn schoolbook_negacyclic_exact(a: &[i64], b: &[i64]) -> Vec<i128> {
    let n = a.len();
    assert_eq!(n, b.len());
    let mut out = vec![0i128; n];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let p = i128::from(x) * i128::from(y);
            if i + j < n {
                out[i + j] += p;
            } else {
                out[i + j - n] -= p;
            }
        }
    }
    out
}

/// Two 61-bit NTT primes, `1 mod 2^16`, whose product bounds the exact
/// integer products needed by ciphertext multiplication.
pub const CRT_PRIMES: [u64; 2] = [2_305_843_009_211_662_337, 2_305_843_009_211_596_801];

/// Exact integer negacyclic multiplication through two NTT primes and CRT.
/// Valid while every output coefficient has magnitude below `p1 * p2 / 2`
/// (about 2^121).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactMultiplier {
    plans: [NttPlan; 2],
    p1_inv_mod_p2: u64,
}

impl ExactMultiplier {
    pub fn new(n: usize) -> Result<Self> {
        let plans = [NttPlan::new(CRT_PRIMES[0], n)?, NttPlan::new(CRT_PRIMES[1], n)?];
        Ok(Self {
            plans,
            p1_inv_mod_p2: super::ntt::inv_mod(CRT_PRIMES[0] % CRT_PRIMES[1], CRT_PRIMES[1]),
        })
    }

    pub fn multiply(&self, a: &[i64], b: &[i64]) -> Vec<i128> {
        let [p1, p2] = CRT_PRIMES;
        let r1 = self.plans[0].multiply(&lift(a, p1), &lift(b, p1));
        let r2 = self.plans[1].multiply(&lift(a, p2), &lift(b, p2));
        let modulus = u128::from(p1) * u128::from(p2);
        r1.into_iter()
            .zip(r2)
            .map(|(x1, x2)| {
                let k = mul_mod(sub_mod(x2, x1 % p2, p2), self.p1_inv_mod_p2, p2);
                let v = u128::from(x1) + u128::from(p1) * u128::from(k);
                if v > modulus / 2 {
                    -((modulus - v) as i128)
                } else {
                    v as i128
                }
            })
            .collect()
    }
}

fn lift(a: &[i64], p: u64) -> Vec<u64> {
    a.iter().map(|&x| reduce_i64(x, p)).collect()
}
