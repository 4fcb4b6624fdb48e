//! Generalized Arnold cat map on an `N x N` integer grid.
//!
//! One iteration sends `(x, y)` to `(x + b*y, a*x + (a*b + 1)*y) mod N`,
//! i.e. multiplies the column vector by `[[1, b], [a, a*b + 1]]`. The matrix
//! has determinant 1, so the map is a bijection of the grid for every
//! `(a, b)` and its inverse is `[[a*b + 1, -b], [-a, 1]]`.
//!
//! Coordinates are `(column x, row y)` with the origin at the top-left.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported grid side. Products of two reduced entries stay far
/// below `u64::MAX` at this size.
pub const MAX_GRID: u32 = 1 << 16;

/// Parameters of a generalized cat map permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CatMapKey {
    n: u32,
    a: u32,
    b: u32,
    k: u32,
}

impl CatMapKey {
    pub fn new(grid_size: u32, a: u32, b: u32, iterations: u32) -> Result<Self> {
        if !(2..=MAX_GRID).contains(&grid_size) {
            return Err(Error::InvalidParameter(format!(
                "cat map grid size must be in 2..={MAX_GRID}, got {grid_size}"
            )));
        }
        if iterations == 0 {
            return Err(Error::InvalidParameter(
                "cat map iteration count must be at least 1".into(),
            ));
        }
        Ok(Self {
            n: grid_size,
            a,
            b,
            k: iterations,
        })
    }

    /// The classic map `(a, b) = (1, 1)`.
    pub fn classic(grid_size: u32, iterations: u32) -> Result<Self> {
        Self::new(grid_size, 1, 1, iterations)
    }

    pub fn grid_size(&self) -> u32 {
        self.n
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn iterations(&self) -> u32 {
        self.k
    }

    /// Same map coefficients with a different iteration count.
    pub fn with_iterations(&self, iterations: u32) -> Result<Self> {
        Self::new(self.n, self.a, self.b, iterations)
    }

    /// Same coefficients and iterations on a different grid.
    pub fn with_grid_size(&self, grid_size: u32) -> Result<Self> {
        Self::new(grid_size, self.a, self.b, self.k)
    }

    fn step_matrix(&self) -> Mat2 {
        let n = u64::from(self.n);
        let a = u64::from(self.a) % n;
        let b = u64::from(self.b) % n;
        Mat2 {
            m: [1 % n, b, a, (a * b + 1) % n],
            n,
        }
    }

    fn inverse_step_matrix(&self) -> Mat2 {
        let n = u64::from(self.n);
        let a = u64::from(self.a) % n;
        let b = u64::from(self.b) % n;
        Mat2 {
            m: [(a * b + 1) % n, (n - b) % n, (n - a) % n, 1 % n],
            n,
        }
    }

    /// Full permutation table of the `k`-fold forward map: entry
    /// `y * N + x` holds the linear index of the image of `(x, y)`.
    pub fn permutation(&self) -> Vec<u32> {
        self.step_matrix().pow(u64::from(self.k)).table()
    }

    /// Full permutation table of the `k`-fold inverse map.
    pub fn inverse_permutation(&self) -> Vec<u32> {
        self.inverse_step_matrix().pow(u64::from(self.k)).table()
    }
}

impl fmt::Display for CatMapKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={},a={},b={},k={}", self.n, self.a, self.b, self.k)
    }
}

impl FromStr for CatMapKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut n, mut a, mut b, mut k) = (None, None, None, None);
        for part in s.trim().split(',') {
            let (name, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("cat map key field `{part}` is not name=value"))
            })?;
            let value: u32 = value.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("cat map key field `{part}` is not an integer"))
            })?;
            let slot = match name.trim() {
                "N" => &mut n,
                "a" => &mut a,
                "b" => &mut b,
                "k" => &mut k,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown cat map key field `{other}`"
                    )))
                }
            };
            if slot.replace(value).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate cat map key field `{}`",
                    name.trim()
                )));
            }
        }
        match (n, a, b, k) {
            (Some(n), Some(a), Some(b), Some(k)) => CatMapKey::new(n, a, b, k),
            _ => Err(Error::InvalidParameter(format!(
                "cat map key `{s}` must set N, a, b and k"
            ))),
        }
    }
}

/// A point of the `N x N` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPoint {
    pub x: u32,
    pub y: u32,
}

impl GridPoint {
    /// Build a point, reducing both coordinates mod `n`.
    pub fn new(x: u32, y: u32, n: u32) -> Self {
        Self { x: x % n, y: y % n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Mat2 {
    /// Row-major `[m00, m01, m10, m11]`, entries reduced mod `n`.
    m: [u64; 4],
    n: u64,
}

impl Mat2 {
    fn identity(n: u64) -> Self {
        Self {
            m: [1 % n, 0, 0, 1 % n],
            n,
        }
    }

    fn mul(&self, rhs: &Mat2) -> Mat2 {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = rhs.m;
        let n = self.n;
        Mat2 {
            m: [
                (a * e + b * g) % n,
                (a * f + b * h) % n,
                (c * e + d * g) % n,
                (c * f + d * h) % n,
            ],
            n,
        }
    }

    fn pow(&self, mut e: u64) -> Mat2 {
        let mut base = *self;
        let mut acc = Mat2::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    fn apply(&self, p: GridPoint) -> GridPoint {
        let (x, y) = (u64::from(p.x), u64::from(p.y));
        let [a, b, c, d] = self.m;
        GridPoint {
            x: ((a * x + b * y) % self.n) as u32,
            y: ((c * x + d * y) % self.n) as u32,
        }
    }

    fn table(&self) -> Vec<u32> {
        let n = self.n as u32;
        let mut out = Vec::with_capacity((n as usize) * (n as usize));
        for y in 0..n {
            for x in 0..n {
                let q = self.apply(GridPoint { x, y });
                out.push(q.y * n + q.x);
            }
        }
        out
    }
}

/// Image of `p` under `key.iterations()` forward steps.
pub fn cat_map_forward(p: GridPoint, key: &CatMapKey) -> GridPoint {
    let p = GridPoint::new(p.x, p.y, key.n);
    key.step_matrix().pow(u64::from(key.k)).apply(p)
}

/// Preimage of `p` under `key.iterations()` forward steps.
pub fn cat_map_inverse(p: GridPoint, key: &CatMapKey) -> GridPoint {
    let p = GridPoint::new(p.x, p.y, key.n);
    key.inverse_step_matrix().pow(u64::from(key.k)).apply(p)
}

/// Default cap on the period search.
pub fn default_period_cap(grid_size: u32) -> u64 {
    3 * u64::from(grid_size)
}

/// Smallest positive iteration count that returns every grid point to its
/// start. The iteration count stored in `key` is ignored.
pub fn period(key: &CatMapKey) -> Result<u64> {
    period_with_cap(key, default_period_cap(key.n))
}

pub fn period_with_cap(key: &CatMapKey, cap: u64) -> Result<u64> {
    let step = key.step_matrix();
    let identity = Mat2::identity(step.n);
    let mut acc = step;
    let mut count = 1;
    while acc != identity {
        if count >= cap {
            return Err(Error::PeriodCapExceeded { cap });
        }
        acc = acc.mul(&step);
        count += 1;
    }
    Ok(count)
}
