//! Negacyclic number theoretic transform over `Z_p[x]/(x^n + 1)` for primes
//! `p = 1 mod 2n`.
//!
//! The forward transform is Cooley-Tukey with the twisting powers of a
//! primitive `2n`-th root `psi` folded into the butterflies (stored in
//! bit-reversed order); the inverse is Gentleman-Sande. Pointwise products
//! of two forward transforms invert to the negacyclic product.

use crate::error::{Error, Result};

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(p)) as u64
}

#[inline]
pub(crate) fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Modular inverse for prime `p` by Fermat.
pub(crate) fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn bit_reverse(mut v: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (v & 1);
        v >>= 1;
    }
    r
}

/// Precomputed twiddles for one prime and ring dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NttPlan {
    p: u64,
    n: usize,
    psi_rev: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    n_inv: u64,
}

impl NttPlan {
    /// Fails unless `n` is a power of two and `p` is a prime with
    /// `p = 1 mod 2n`.
    pub fn new(p: u64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::InvalidParameter(format!("NTT size {n} is not a power of two >= 2")));
        }
        if p >= 1 << 63 || !is_prime(p) || (p - 1) % (2 * n as u64) != 0 {
            return Err(Error::InvalidParameter(format!(
                "{p} is not an NTT-friendly prime for n = {n}"
            )));
        }
        let psi = find_psi(p, n);
        let psi_inv = inv_mod(psi, p);
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0; n];
        let mut psi_inv_rev = vec![0; n];
        let (mut pw, mut ipw) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = pw;
            psi_inv_rev[r] = ipw;
            pw = mul_mod(pw, psi, p);
            ipw = mul_mod(ipw, psi_inv, p);
        }
        Ok(Self {
            p,
            n,
            psi_rev,
            psi_inv_rev,
            n_inv: inv_mod(n as u64, p),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let p = self.p;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t /= 2;
            for i in 0..m {
                let j1 = 2 * i * t;
                let s = self.psi_rev[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_mod(a[j + t], s, p);
                    a[j] = add_mod(u, v, p);
                    a[j + t] = sub_mod(u, v, p);
                }
            }
            m *= 2;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let p = self.p;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m / 2;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.psi_inv_rev[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, p);
                    a[j + t] = mul_mod(sub_mod(u, v, p), s, p);
                }
                j1 += 2 * t;
            }
            t *= 2;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_mod(*x, self.n_inv, p);
        }
    }

    /// Negacyclic product of two polynomials with coefficients in `[0, p)`.
    pub fn multiply(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.forward(&mut fa);
        self.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = mul_mod(*x, *y, self.p);
        }
        self.inverse(&mut fa);
        fa
    }
}

fn find_psi(p: u64, n: usize) -> u64 {
    let exp = (p - 1) / (2 * n as u64);
    (2..)
        .map(|g| pow_mod(g, exp, p))
        .find(|&psi| pow_mod(psi, n as u64, p) == p - 1)
        .expect("a prime p = 1 mod 2n has a primitive 2n-th root")
}
