//! Fixed channel transforms used as pointwise convolutions.
//!
//! A transform pointwise layer maps the `N`-channel vector at each spatial
//! location to `M` output channels:
//!
//! 1. zero-pad the vector to length `L = max(N, M)` (rounded up to a power of
//!    two only when [`TransformSpec::with_pow2_padding`] is requested),
//! 2. multiply by the unnormalized `L × L` Hadamard or DCT-II basis,
//! 3. keep the first `M` outputs.
//!
//! No normalization factor is applied anywhere; a following batch norm owns
//! the scale. Every function here is pure and thread-safe.

pub mod count;
pub mod dct;
pub mod hadamard;

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use count::{count_ops, op_count, Counted, OpCount, PcEvaluation};
pub use dct::{dct_kernel, fast_dct, DctKernel, DctPlan, DctScalar};
pub use hadamard::{fwht_blocks, fwht_in_place, hadamard_matrix, HadamardMatrix};

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Dwht,
    Dct,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformKind::Dwht => "DWHT",
            TransformKind::Dct => "DCT",
        })
    }
}

impl FromStr for TransformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dwht" | "wht" | "hadamard" => Ok(TransformKind::Dwht),
            "dct" => Ok(TransformKind::Dct),
            other => Err(Error::Config(format!("unknown transform '{other}'"))),
        }
    }
}

/// Which fixed transform a pointwise layer applies, and how.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub fast: bool,
    pub pad_to_pow2: bool,
}

impl TransformSpec {
    /// Fast-path spec. Fails if the padded length `max(N, M)` is not a power
    /// of two.
    pub fn new(kind: TransformKind, in_channels: usize, out_channels: usize) -> Result<Self> {
        let spec = Self {
            kind,
            in_channels,
            out_channels,
            fast: true,
            pad_to_pow2: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dwht(in_channels: usize, out_channels: usize) -> Result<Self> {
        Self::new(TransformKind::Dwht, in_channels, out_channels)
    }

    pub fn dct(in_channels: usize, out_channels: usize) -> Result<Self> {
        Self::new(TransformKind::Dct, in_channels, out_channels)
    }

    /// Builds a spec without validating it; call [`TransformSpec::validate`]
    /// before use.
    pub fn unchecked(
        kind: TransformKind,
        in_channels: usize,
        out_channels: usize,
        fast: bool,
        pad_to_pow2: bool,
    ) -> Self {
        Self {
            kind,
            in_channels,
            out_channels,
            fast,
            pad_to_pow2,
        }
    }

    pub fn with_fast(mut self, fast: bool) -> Result<Self> {
        self.fast = fast;
        self.validate()?;
        Ok(self)
    }

    /// Opt in to zero-padding the channel vector up to the next power of two.
    pub fn with_pow2_padding(mut self) -> Self {
        self.pad_to_pow2 = true;
        self
    }

    fn needs_pow2(&self) -> bool {
        self.kind == TransformKind::Dwht || self.fast
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return shape_err(format!(
                "transform channels must be >= 1, got {}x{}",
                self.in_channels, self.out_channels
            ));
        }
        let len = self.in_channels.max(self.out_channels);
        if self.needs_pow2() && !self.pad_to_pow2 && !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        Ok(())
    }

    /// Length of the channel vector the basis is applied to.
    pub fn transform_len(&self) -> usize {
        let len = self.in_channels.max(self.out_channels);
        if self.needs_pow2() && self.pad_to_pow2 {
            len.next_power_of_two()
        } else {
            len
        }
    }

    pub fn evaluation(&self) -> PcEvaluation {
        match (self.kind, self.fast) {
            (TransformKind::Dwht, _) => PcEvaluation::FastDWHT,
            (TransformKind::Dct, true) => PcEvaluation::FastDCT,
            (TransformKind::Dct, false) => PcEvaluation::NaiveDCT,
        }
    }

    /// Operations per spatial location.
    ///
    /// A naive Hadamard multiply is charged `(N-1)·M` additions and no
    /// multiplications.
    pub fn op_count(&self) -> Result<OpCount> {
        self.validate()?;
        let len = self.transform_len();
        match (self.kind, self.fast) {
            (TransformKind::Dwht, true) => op_count(PcEvaluation::FastDWHT, len, len),
            (TransformKind::Dwht, false) => Ok(OpCount::new(
                0,
                (self.in_channels as u64 - 1) * self.out_channels as u64,
                0,
            )),
            (TransformKind::Dct, true) => op_count(PcEvaluation::FastDCT, len, len),
            (TransformKind::Dct, false) => op_count(PcEvaluation::NaiveDCT, self.in_channels, self.out_channels),
        }
    }
}

/// Zero-pads `x` up to `target` entries; longer inputs are returned as-is
/// (truncation happens after the transform).
pub fn channel_fit<T: Copy + Zero>(x: &[T], target: usize) -> Vec<T> {
    let mut v = x.to_vec();
    if v.len() < target {
        v.resize(target, T::zero());
    }
    v
}

/// Reference DWHT pointwise map: dense `H · pad(x)`, truncated to
/// `spec.out_channels`.
pub fn dwht_naive(x: &[f64], spec: &TransformSpec) -> Result<Vec<f64>> {
    if spec.kind != TransformKind::Dwht {
        return Err(Error::Config("dwht_naive needs a DWHT spec".into()));
    }
    check_len(x.len(), spec)?;
    spec.validate()?;
    let len = spec.transform_len();
    let h = hadamard_matrix(len.trailing_zeros())?;
    let mut y = h.apply(&channel_fit(x, len));
    y.truncate(spec.out_channels);
    Ok(y)
}

/// Reference DCT pointwise map: dense `C · pad(x)`, truncated.
pub fn dct_naive(x: &[f64], spec: &TransformSpec) -> Result<Vec<f64>> {
    if spec.kind != TransformKind::Dct {
        return Err(Error::Config("dct_naive needs a DCT spec".into()));
    }
    check_len(x.len(), spec)?;
    spec.validate()?;
    let len = spec.transform_len();
    let k = dct_kernel(len)?;
    let mut y = k.apply(&channel_fit(x, len));
    y.truncate(spec.out_channels);
    Ok(y)
}

/// Fast DWHT of one channel vector, generic over the scalar so that integer
/// and op-counting scalars can run the same butterfly.
pub fn dwht_fast_vec<T>(x: &[T], out_channels: usize) -> Result<Vec<T>>
where
    T: Copy + Zero + Add<Output = T> + Sub<Output = T>,
{
    let len = x.len().max(out_channels);
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let mut v = channel_fit(x, len);
    fwht_in_place(&mut v)?;
    v.truncate(out_channels);
    Ok(v)
}

/// Fast DCT-II of one channel vector with pad/truncate.
pub fn dct_fast_vec<T: DctScalar>(x: &[T], out_channels: usize) -> Result<Vec<T>> {
    let len = x.len().max(out_channels);
    let mut v = fast_dct(&channel_fit(x, len))?;
    v.truncate(out_channels);
    Ok(v)
}

fn check_len(n: usize, spec: &TransformSpec) -> Result<()> {
    if n != spec.in_channels {
        return shape_err(format!("expected {} input channels, got {n}", spec.in_channels));
    }
    Ok(())
}

fn check_tensor(x: &Tensor4, channels: usize) -> Result<()> {
    if x.channels() != channels {
        return shape_err(format!("expected {channels} channels, got {}", x.channels()));
    }
    Ok(())
}

/// Fast DWHT pointwise convolution over a whole tensor.
///
/// Runs the even/odd butterfly on stacks of `H × W` channel planes, so every
/// spatial location sees `log2 L` passes of `L/2` additions and `L/2`
/// subtractions, and no multiplications.
pub fn dwht_fast(x: &Tensor4, out_channels: usize) -> Result<Tensor4> {
    let len = x.channels().max(out_channels);
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    dwht_planes(x, out_channels, len)
}

fn dwht_planes(x: &Tensor4, out_channels: usize, len: usize) -> Result<Tensor4> {
    let [b, n, h, w] = x.dims();
    let p = h * w;
    let mut out = Tensor4::zeros([b, out_channels, h, w]);
    let mut buf = vec![0.0; len * p];
    let mut scratch = vec![0.0; len * p];
    for bi in 0..b {
        buf[..n * p].copy_from_slice(x.item(bi));
        buf[n * p..].fill(0.0);
        fwht_blocks(&mut buf, &mut scratch, len, p)?;
        out.item_mut(bi).copy_from_slice(&buf[..out_channels * p]);
    }
    Ok(out)
}

/// Applies a per-location vector map `f: R^L -> R^L` to the padded channel
/// vectors of `x`, keeping `keep` outputs.
fn map_locations(x: &Tensor4, len: usize, keep: usize, mut f: impl FnMut(&mut [f64], &mut [f64])) -> Tensor4 {
    let [b, n, h, w] = x.dims();
    let p = h * w;
    let mut out = Tensor4::zeros([b, keep, h, w]);
    let mut v = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    for bi in 0..b {
        let src = x.item(bi);
        let dst = out.item_mut(bi);
        for loc in 0..p {
            for c in 0..n {
                v[c] = src[c * p + loc];
            }
            v[n..].fill(0.0);
            f(&mut v, &mut scratch);
            for c in 0..keep {
                dst[c * p + loc] = v[c];
            }
        }
    }
    out
}

/// DCT pointwise convolution: fast recursive path or dense kernel multiply
/// depending on `spec.fast`.
pub fn dct_apply(x: &Tensor4, spec: &TransformSpec) -> Result<Tensor4> {
    if spec.kind != TransformKind::Dct {
        return Err(Error::Config("dct_apply needs a DCT spec".into()));
    }
    spec.validate()?;
    check_tensor(x, spec.in_channels)?;
    let len = spec.transform_len();
    if spec.fast {
        let plan = DctPlan::new(len)?;
        Ok(map_locations(x, len, spec.out_channels, |v, s| plan.forward(v, s)))
    } else {
        let k = dct_kernel(len)?;
        let n = spec.in_channels;
        Ok(map_locations(x, len, spec.out_channels, |v, s| {
            for (m, o) in s.iter_mut().enumerate().take(spec.out_channels) {
                *o = k.row(m)[..n].iter().zip(&v[..n]).map(|(c, x)| c * x).sum();
            }
            v.copy_from_slice(s);
        }))
    }
}

/// Forward map of a transform pointwise layer.
pub fn transform_forward(x: &Tensor4, spec: &TransformSpec) -> Result<Tensor4> {
    spec.validate()?;
    check_tensor(x, spec.in_channels)?;
    match spec.kind {
        TransformKind::Dwht if spec.fast => dwht_planes(x, spec.out_channels, spec.transform_len()),
        TransformKind::Dwht => {
            let len = spec.transform_len();
            let h = hadamard_matrix(len.trailing_zeros())?;
            Ok(map_locations(x, len, spec.out_channels, |v, _| {
                let y = h.apply(v);
                v.copy_from_slice(&y);
            }))
        }
        TransformKind::Dct => dct_apply(x, spec),
    }
}

/// Adjoint of [`transform_forward`]: zero-pad `grad` from `M` to `L`
/// channels, apply the transposed basis, keep the first `N` channels.
pub fn transform_adjoint(grad: &Tensor4, spec: &TransformSpec) -> Result<Tensor4> {
    spec.validate()?;
    check_tensor(grad, spec.out_channels)?;
    let len = spec.transform_len();
    match (spec.kind, spec.fast) {
        // H is symmetric
        (TransformKind::Dwht, true) => dwht_planes(grad, spec.in_channels, len),
        (TransformKind::Dwht, false) => {
            let h = hadamard_matrix(len.trailing_zeros())?;
            Ok(map_locations(grad, len, spec.in_channels, |v, _| {
                let y = h.apply(v);
                v.copy_from_slice(&y);
            }))
        }
        (TransformKind::Dct, true) => {
            let plan = DctPlan::new(len)?;
            Ok(map_locations(grad, len, spec.in_channels, |v, s| plan.adjoint(v, s)))
        }
        (TransformKind::Dct, false) => {
            let k = dct_kernel(len)?;
            Ok(map_locations(grad, len, spec.in_channels, |v, _| {
                let y = k.apply_transpose(v);
                v.copy_from_slice(&y);
            }))
        }
    }
}
