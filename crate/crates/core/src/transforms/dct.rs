//! Unnormalized DCT-II basis and a recursive fast evaluation.
//!
//! The fast path splits an `L`-point DCT-II into two `L/2`-point DCT-IIs:
//!
//! ```text
//! u[n] = x[n] + x[L-1-n]
//! v[n] = (x[n] - x[L-1-n]) / (2 cos((2n+1)π / 2L))
//! X[2k]   = DCT(u)[k]
//! X[2k+1] = DCT(v)[k] + DCT(v)[k+1]      (DCT(v)[L/2] = 0)
//! ```
//!
//! which costs `L/2` multiplications, `L/2` additions, `L/2` subtractions and
//! `L/2 - 1` recombination additions per level. The adjoint (DCT-III without
//! the half-weighted DC term) runs the same graph backwards.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_traits::Zero;

use crate::error::{Error, Result};

/// Largest dense kernel size accepted by [`dct_kernel`].
pub const MAX_KERNEL_SIZE: usize = 1 << 13;

pub trait DctScalar: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn from_f64(v: f64) -> Self;
}

impl DctScalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl DctScalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

/// Dense `N × N` kernel with `entries[m][x] = cos((2x+1)mπ / 2N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DctKernel {
    size: usize,
    entries: Vec<f64>,
}

impl DctKernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, m: usize, x: usize) -> f64 {
        self.entries[m * self.size + x]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.entries[m * self.size..(m + 1) * self.size]
    }

    /// `C · x`, all `N` outputs.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size);
        (0..self.size)
            .map(|m| self.row(m).iter().zip(x).map(|(c, v)| c * v).sum())
            .collect()
    }

    /// `Cᵀ · g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.size);
        let mut out = vec![0.0; self.size];
        for (m, &gm) in g.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.row(m)) {
                *o += c * gm;
            }
        }
        out
    }
}

pub fn dct_kernel(size: usize) -> Result<DctKernel> {
    if size == 0 {
        return Err(Error::Shape("DCT size must be >= 1".into()));
    }
    if size > MAX_KERNEL_SIZE {
        return Err(Error::SizeLimit {
            what: "dct kernel size",
            value: size,
            max: MAX_KERNEL_SIZE,
        });
    }
    let n = size as f64;
    let mut entries = Vec::with_capacity(size * size);
    for m in 0..size {
        for x in 0..size {
            entries.push(((2 * x + 1) as f64 * m as f64 * PI / (2.0 * n)).cos());
        }
    }
    Ok(DctKernel { size, entries })
}

/// Precomputed factors for a power-of-two fast DCT.
#[derive(Clone, Debug)]
pub struct DctPlan {
    len: usize,
    // factors[lg] holds 1 / (2 cos((2n+1)π / 2L)) for L = 2^lg, n < L/2
    factors: Vec<Vec<f64>>,
}

impl DctPlan {
    pub fn new(len: usize) -> Result<Self> {
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let factors = (0..=len.trailing_zeros())
            .map(|lg| {
                let l = 1usize << lg;
                (0..l / 2)
                    .map(|n| 0.5 / ((2 * n + 1) as f64 * PI / (2 * l) as f64).cos())
                    .collect()
            })
            .collect();
        Ok(Self { len, factors })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place DCT-II of `x` (`x.len() == self.len()`).
    pub fn forward<T: DctScalar>(&self, x: &mut [T], scratch: &mut [T]) {
        assert_eq!(x.len(), self.len);
        assert_eq!(scratch.len(), self.len);
        self.dct2(x, scratch);
    }

    /// In-place transpose of [`DctPlan::forward`].
    pub fn adjoint<T: DctScalar>(&self, g: &mut [T], scratch: &mut [T]) {
        assert_eq!(g.len(), self.len);
        assert_eq!(scratch.len(), self.len);
        self.dct2_transpose(g, scratch);
    }

    fn dct2<T: DctScalar>(&self, x: &mut [T], tmp: &mut [T]) {
        let n = x.len();
        if n == 1 {
            return;
        }
        let half = n / 2;
        let f = &self.factors[n.trailing_zeros() as usize];
        for i in 0..half {
            let a = x[i];
            let b = x[n - 1 - i];
            tmp[i] = a + b;
            tmp[half + i] = (a - b) * T::from_f64(f[i]);
        }
        {
            let (u, v) = tmp.split_at_mut(half);
            let (su, sv) = x.split_at_mut(half);
            self.dct2(u, su);
            self.dct2(v, sv);
        }
        for k in 0..half {
            x[2 * k] = tmp[k];
        }
        for k in 0..half - 1 {
            x[2 * k + 1] = tmp[half + k] + tmp[half + k + 1];
        }
        x[n - 1] = tmp[n - 1];
    }

    fn dct2_transpose<T: DctScalar>(&self, g: &mut [T], tmp: &mut [T]) {
        let n = g.len();
        if n == 1 {
            return;
        }
        let half = n / 2;
        for k in 0..half {
            tmp[k] = g[2 * k];
        }
        tmp[half] = g[1];
        for k in 1..half {
            tmp[half + k] = g[2 * k + 1] + g[2 * k - 1];
        }
        {
            let (u, v) = tmp.split_at_mut(half);
            let (su, sv) = g.split_at_mut(half);
            self.dct2_transpose(u, su);
            self.dct2_transpose(v, sv);
        }
        let f = &self.factors[n.trailing_zeros() as usize];
        for i in 0..half {
            let a = tmp[i];
            let b = tmp[half + i] * T::from_f64(f[i]);
            g[i] = a + b;
            g[n - 1 - i] = a - b;
        }
    }
}

/// Convenience: fast DCT-II of a power-of-two length vector.
pub fn fast_dct<T: DctScalar>(x: &[T]) -> Result<Vec<T>> {
    let plan = DctPlan::new(x.len())?;
    let mut out = x.to_vec();
    let mut scratch = vec![T::zero(); x.len()];
    plan.forward(&mut out, &mut scratch);
    Ok(out)
}
