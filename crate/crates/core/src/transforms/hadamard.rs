//! Walsh-Hadamard basis and its butterfly evaluation.

use std::ops::{Add, Sub};

use num_traits::Zero;

use crate::error::{Error, Result};

/// Largest supported `log2` order for a dense [`HadamardMatrix`].
pub const MAX_DENSE_ORDER: u32 = 16;

/// Dense `2^D × 2^D` matrix of ±1 built by the recursive block rule
/// `H^D = [[H^{D-1}, H^{D-1}], [H^{D-1}, -H^{D-1}]]`, `H^0 = [1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HadamardMatrix {
    order_log2: u32,
    entries: Vec<i8>,
}

impl HadamardMatrix {
    pub fn order_log2(&self) -> u32 {
        self.order_log2
    }

    pub fn size(&self) -> usize {
        1 << self.order_log2
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.size() + col]
    }

    pub fn row(&self, m: usize) -> &[i8] {
        let n = self.size();
        &self.entries[m * n..(m + 1) * n]
    }

    /// Overwrites one entry. Used by negative-control fixtures that need a
    /// deliberately broken basis.
    pub fn set(&mut self, row: usize, col: usize, v: i8) {
        let n = self.size();
        self.entries[row * n + col] = v;
    }

    /// `H · x` by dense multiplication, no truncation.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size());
        (0..self.size())
            .map(|m| self.row(m).iter().zip(x).map(|(&h, &v)| h as f64 * v).sum())
            .collect()
    }
}

/// Builds `H^D` for `D = order_log2` by literally expanding the block recursion.
pub fn hadamard_matrix(order_log2: u32) -> Result<HadamardMatrix> {
    if order_log2 > MAX_DENSE_ORDER {
        return Err(Error::SizeLimit {
            what: "hadamard order_log2",
            value: order_log2 as usize,
            max: MAX_DENSE_ORDER as usize,
        });
    }
    let mut entries = vec![1i8];
    let mut n = 1usize;
    for _ in 0..order_log2 {
        let m = 2 * n;
        let mut next = vec![0i8; m * m];
        for r in 0..n {
            for c in 0..n {
                let h = entries[r * n + c];
                next[r * m + c] = h;
                next[r * m + c + n] = h;
                next[(r + n) * m + c] = h;
                next[(r + n) * m + c + n] = -h;
            }
        }
        entries = next;
        n = m;
    }
    Ok(HadamardMatrix { order_log2, entries })
}

/// Walsh-Hadamard butterfly over `len` elements, each element a contiguous
/// block of `block` scalars.
///
/// Every pass reads the even- and odd-indexed elements, writes their sums to
/// the first half and their differences to the second half. After `log2 len`
/// passes the result is `H · x` in natural (Hadamard) order. With `block = 1`
/// this transforms one channel vector; with `block = H * W` it transforms a
/// whole stack of channel planes at once, with the same per-location cost.
///
/// `data` and `scratch` must both hold `len * block` values; the result ends
/// up in `data`.
pub fn fwht_blocks<T>(data: &mut [T], scratch: &mut [T], len: usize, block: usize) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    assert_eq!(data.len(), len * block);
    assert_eq!(scratch.len(), len * block);
    let passes = len.trailing_zeros();
    let half = len / 2;
    let mut src: &mut [T] = data;
    let mut dst: &mut [T] = scratch;
    for _ in 0..passes {
        {
            let (lo, hi) = dst.split_at_mut(half * block);
            for k in 0..half {
                let e = &src[2 * k * block..(2 * k + 1) * block];
                let o = &src[(2 * k + 1) * block..(2 * k + 2) * block];
                let sum = &mut lo[k * block..(k + 1) * block];
                let diff = &mut hi[k * block..(k + 1) * block];
                for i in 0..block {
                    sum[i] = e[i] + o[i];
                    diff[i] = e[i] - o[i];
                }
            }
        }
        std::mem::swap(&mut src, &mut dst);
    }
    if passes % 2 == 1 {
        // result sits in `scratch`
        dst.copy_from_slice(src);
    }
    Ok(())
}

/// In-place fast Walsh-Hadamard transform of one vector.
pub fn fwht_in_place<T>(x: &mut [T]) -> Result<()>
where
    T: Copy + Zero + Add<Output = T> + Sub<Output = T>,
{
    let mut scratch = vec![T::zero(); x.len()];
    fwht_blocks(x, &mut scratch, x.len(), 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(h: &HadamardMatrix) -> Vec<Vec<i8>> {
        (0..h.size()).map(|m| h.row(m).to_vec()).collect()
    }

    #[test]
    fn small_orders() {
        assert_eq!(rows(&hadamard_matrix(0).unwrap()), vec![vec![1]]);
        assert_eq!(rows(&hadamard_matrix(1).unwrap()), vec![vec![1, 1], vec![1, -1]]);
        assert_eq!(
            rows(&hadamard_matrix(2).unwrap()),
            vec![
                vec![1, 1, 1, 1],
                vec![1, -1, 1, -1],
                vec![1, 1, -1, -1],
                vec![1, -1, -1, 1]
            ]
        );
    }

    #[test]
    fn order_limit() {
        assert!(matches!(hadamard_matrix(17), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn symmetric_and_orthogonal() {
        for d in 0..=7 {
            let h = hadamard_matrix(d).unwrap();
            let n = h.size();
            for r in 0..n {
                for c in 0..n {
                    assert_eq!(h.get(r, c), h.get(c, r));
                }
                for s in 0..n {
                    let dot: i64 = h.row(r).iter().zip(h.row(s)).map(|(&a, &b)| a as i64 * b as i64).sum();
                    assert_eq!(dot, if r == s { n as i64 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn butterfly_matches_hand_example() {
        let mut x = [1i64, 2, 3, 4];
        fwht_in_place(&mut x).unwrap();
        assert_eq!(x, [10, -2, -4, 0]);
    }

    #[test]
    fn block_butterfly_transforms_each_lane() {
        // two lanes interleaved per element: lane 0 = [1,2,3,4], lane 1 = [1,0,0,0]
        let mut data = [1i64, 1, 2, 0, 3, 0, 4, 0];
        let mut scratch = [0i64; 8];
        fwht_blocks(&mut data, &mut scratch, 4, 2).unwrap();
        assert_eq!(data, [10, 1, -2, 1, -4, 1, 0, 1]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut x = [1.0f64, 2.0, 3.0];
        assert!(matches!(fwht_in_place(&mut x), Err(Error::NotPowerOfTwo(3))));
    }
}
