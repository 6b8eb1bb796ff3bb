//! Dense 4-D activation tensor.
//!
//! Layout is NCHW, row-major: element `(b, c, h, w)` lives at
//! `((b * C + c) * H + h) * W + w`. Every layer in the crate reads and writes
//! this one layout; a channel vector at a spatial location is therefore a
//! strided gather with stride `H * W`.

use crate::error::{shape_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return shape_err(format!("all dims must be >= 1, got {dims:?}"));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return shape_err(format!(
                "data length {} does not match dims {dims:?} ({len})",
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "zero-sized tensor {dims:?}");
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        let [b, c, h, w] = dims;
        let mut k = 0;
        for bi in 0..b {
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        t.data[k] = f(bi, ci, hi, wi);
                        k += 1;
                    }
                }
            }
        }
        t
    }

    /// A `(1, N, 1, 1)` tensor holding one channel vector.
    pub fn from_channel_vector(v: &[f64]) -> Result<Self> {
        Self::new([1, v.len(), 1, 1], v.to_vec())
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }
    pub fn batch(&self) -> usize {
        self.dims[0]
    }
    pub fn channels(&self) -> usize {
        self.dims[1]
    }
    pub fn height(&self) -> usize {
        self.dims[2]
    }
    pub fn width(&self) -> usize {
        self.dims[3]
    }
    /// Number of spatial locations per batch item, `H * W`.
    pub fn plane_len(&self) -> usize {
        self.dims[2] * self.dims[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.dims[1] + c) * self.dims[2] + h) * self.dims[3] + w
    }
    #[inline]
    pub fn get(&self, b: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset(b, c, h, w)]
    }
    #[inline]
    pub fn set(&mut self, b: usize, c: usize, h: usize, w: usize, v: f64) {
        let o = self.offset(b, c, h, w);
        self.data[o] = v;
    }

    /// Contiguous `H * W` plane of channel `c` in batch item `b`.
    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let p = self.plane_len();
        let start = (b * self.dims[1] + c) * p;
        &self.data[start..start + p]
    }

    /// All channel planes of batch item `b`, `C * H * W` values.
    pub fn item(&self, b: usize) -> &[f64] {
        let n = self.dims[1] * self.plane_len();
        &self.data[b * n..(b + 1) * n]
    }
    pub fn item_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.dims[1] * self.plane_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn channel_vector(&self, b: usize, h: usize, w: usize) -> Vec<f64> {
        (0..self.dims[1]).map(|c| self.get(b, c, h, w)).collect()
    }

    pub fn set_channel_vector(&mut self, b: usize, h: usize, w: usize, v: &[f64]) {
        assert_eq!(v.len(), self.dims[1]);
        for (c, &x) in v.iter().enumerate() {
            self.set(b, c, h, w, x);
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copy of batch items `indices`, in that order.
    pub fn select_batch(&self, indices: &[usize]) -> Self {
        let n = self.dims[1] * self.plane_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.item(i));
        }
        Self {
            dims: [indices.len(), self.dims[1], self.dims[2], self.dims[3]],
            data,
        }
    }
}
