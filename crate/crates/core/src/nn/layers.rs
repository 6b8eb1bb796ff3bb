//! Layer implementations.
//!
//! Each layer has a free forward function (stateless, usable on its own) and
//! a [`Layer`] struct that owns parameters and caches forward state for the
//! backward pass. Backward passes accumulate into parameter gradients.

use super::param::{Buffer, ParamTensor};
use super::spec::conv3x3_out;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor4;
use crate::transforms::{transform_adjoint, transform_forward, TransformSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub trait Layer: Send {
    fn name(&self) -> &str;
    fn forward(&mut self, x: &Tensor4, mode: Mode) -> Result<Tensor4>;
    /// Gradient w.r.t. the input of the most recent forward call.
    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4>;
    fn params(&self) -> Vec<&ParamTensor> {
        Vec::new()
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        Vec::new()
    }
    fn buffers(&self) -> Vec<&Buffer> {
        Vec::new()
    }
    fn buffers_mut(&mut self) -> Vec<&mut Buffer> {
        Vec::new()
    }
}

fn cached<'a>(c: &'a Option<Tensor4>, name: &str) -> Result<&'a Tensor4> {
    c.as_ref()
        .ok_or_else(|| Error::Shape(format!("{name}: backward called before forward")))
}

fn expect_channels(x: &Tensor4, want: usize, what: &str) -> Result<()> {
    if x.channels() != want {
        return shape_err(format!("{what}: expected {want} channels, got {}", x.channels()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 3x3 correlation kernels (padding 1)

/// Output indices `o < out` for which `o * stride + k - 1` lands inside `[0, len)`.
fn valid_range(k: usize, len: usize, stride: usize, out: usize) -> (usize, usize) {
    let lo = if k == 0 { 1 } else { 0 };
    let hi = if len >= k { ((len - k) / stride + 1).min(out) } else { 0 };
    (lo, hi.max(lo))
}

#[allow(clippy::too_many_arguments)]
fn correlate3x3(src: &[f64], h: usize, w: usize, k: &[f64], stride: usize, dst: &mut [f64], oh: usize, ow: usize) {
    for kh in 0..3 {
        let (r0, r1) = valid_range(kh, h, stride, oh);
        for kw in 0..3 {
            let (c0, c1) = valid_range(kw, w, stride, ow);
            let kv = k[kh * 3 + kw];
            for oi in r0..r1 {
                let ii = oi * stride + kh - 1;
                let srow = &src[ii * w..(ii + 1) * w];
                let drow = &mut dst[oi * ow..(oi + 1) * ow];
                for oj in c0..c1 {
                    drow[oj] += kv * srow[oj * stride + kw - 1];
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn correlate3x3_backward(
    src: &[f64],
    h: usize,
    w: usize,
    k: &[f64],
    stride: usize,
    gout: &[f64],
    oh: usize,
    ow: usize,
    gsrc: &mut [f64],
    gk: Option<&mut [f64]>,
) {
    let mut local = [0.0; 9];
    for kh in 0..3 {
        let (r0, r1) = valid_range(kh, h, stride, oh);
        for kw in 0..3 {
            let (c0, c1) = valid_range(kw, w, stride, ow);
            let kv = k[kh * 3 + kw];
            let mut acc = 0.0;
            for oi in r0..r1 {
                let ii = oi * stride + kh - 1;
                let grow = &gout[oi * ow..(oi + 1) * ow];
                let srow = &src[ii * w..(ii + 1) * w];
                let gsrow = &mut gsrc[ii * w..(ii + 1) * w];
                for (oj, &g) in grow.iter().enumerate().take(c1).skip(c0) {
                    let jj = oj * stride + kw - 1;
                    acc += g * srow[jj];
                    gsrow[jj] += kv * g;
                }
            }
            local[kh * 3 + kw] = acc;
        }
    }
    if let Some(gk) = gk {
        for (g, l) in gk.iter_mut().zip(local) {
            *g += l;
        }
    }
}

/// Per-channel 3×3 correlation with padding 1; `weights` is `C × 3 × 3`.
pub fn depthwise_conv3x3_forward(x: &Tensor4, weights: &ParamTensor, stride: usize) -> Result<Tensor4> {
    let [b, c, h, w] = x.dims();
    if weights.len() != 9 * c {
        return shape_err(format!(
            "depthwise weights hold {} values, expected {} for {c} channels",
            weights.len(),
            9 * c
        ));
    }
    if stride != 1 && stride != 2 {
        return shape_err(format!("stride must be 1 or 2, got {stride}"));
    }
    let (oh, ow) = (conv3x3_out(h, stride), conv3x3_out(w, stride));
    let mut out = Tensor4::zeros([b, c, oh, ow]);
    let op = oh * ow;
    for bi in 0..b {
        for ci in 0..c {
            let src = x.plane(bi, ci);
            let k = &weights.values[ci * 9..ci * 9 + 9];
            let start = (bi * c + ci) * op;
            correlate3x3(src, h, w, k, stride, &mut out.data_mut()[start..start + op], oh, ow);
        }
    }
    Ok(out)
}

/// `Z[:, m] = Σ_n W[m, n] · X[:, n]` at every location; `weights` is `M × N`.
pub fn pointwise_conv_forward(x: &Tensor4, weights: &ParamTensor) -> Result<Tensor4> {
    let [b, n, h, w] = x.dims();
    if weights.shape.len() != 2 || weights.shape[1] != n {
        return shape_err(format!(
            "pointwise weights {:?} do not match {n} input channels",
            weights.shape
        ));
    }
    let m = weights.shape[0];
    let p = h * w;
    let mut out = Tensor4::zeros([b, m, h, w]);
    for bi in 0..b {
        let src = x.item(bi);
        let dst = out.item_mut(bi);
        for mi in 0..m {
            let drow = &mut dst[mi * p..(mi + 1) * p];
            for ni in 0..n {
                let wv = weights.values[mi * n + ni];
                if wv == 0.0 {
                    continue;
                }
                for (d, s) in drow.iter_mut().zip(&src[ni * p..(ni + 1) * p]) {
                    *d += wv * s;
                }
            }
        }
    }
    Ok(out)
}

pub fn transform_pc_forward(x: &Tensor4, spec: &TransformSpec) -> Result<Tensor4> {
    transform_forward(x, spec)
}

/// Adjoint of the fixed transform map, used to push gradients through a
/// transform pointwise layer.
pub fn transform_pc_backward(grad_out: &Tensor4, spec: &TransformSpec) -> Result<Tensor4> {
    transform_adjoint(grad_out, spec)
}

pub fn relu_forward(x: &Tensor4) -> Tensor4 {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// ShuffleNet channel shuffle: view channels as `groups × (C/groups)`,
/// transpose, flatten. Output channel `j·groups + i` is input channel
/// `i·(C/groups) + j`.
pub fn channel_shuffle(x: &Tensor4, groups: usize) -> Result<Tensor4> {
    let [b, c, h, w] = x.dims();
    if groups == 0 || c % groups != 0 {
        return shape_err(format!("cannot shuffle {c} channels into {groups} groups"));
    }
    let per = c / groups;
    let p = h * w;
    let mut out = Tensor4::zeros(x.dims());
    for bi in 0..b {
        let src = x.item(bi);
        let dst = out.item_mut(bi);
        for i in 0..groups {
            for j in 0..per {
                let from = i * per + j;
                let to = j * groups + i;
                dst[to * p..(to + 1) * p].copy_from_slice(&src[from * p..(from + 1) * p]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`channel_shuffle`] with the same `groups`.
pub fn channel_unshuffle(x: &Tensor4, groups: usize) -> Result<Tensor4> {
    let c = x.channels();
    if groups == 0 || !c.is_multiple_of(groups) {
        return shape_err(format!("cannot unshuffle {c} channels from {groups} groups"));
    }
    channel_shuffle(x, c / groups)
}

/// Splits channels into the first `at` and the remaining ones.
pub fn channel_split_at(x: &Tensor4, at: usize) -> Result<(Tensor4, Tensor4)> {
    let [b, c, h, w] = x.dims();
    if at == 0 || at >= c {
        return shape_err(format!("cannot split {c} channels at {at}"));
    }
    let p = h * w;
    let mut a = Tensor4::zeros([b, at, h, w]);
    let mut r = Tensor4::zeros([b, c - at, h, w]);
    for bi in 0..b {
        let src = x.item(bi);
        a.item_mut(bi).copy_from_slice(&src[..at * p]);
        r.item_mut(bi).copy_from_slice(&src[at * p..]);
    }
    Ok((a, r))
}

/// Halves the channels.
pub fn channel_split(x: &Tensor4) -> Result<(Tensor4, Tensor4)> {
    if !x.channels().is_multiple_of(2) {
        return shape_err(format!("cannot split {} channels in half", x.channels()));
    }
    channel_split_at(x, x.channels() / 2)
}

pub fn concat(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    let [ba, ca, ha, wa] = a.dims();
    let [bb, cb, hb, wb] = b.dims();
    if (ba, ha, wa) != (bb, hb, wb) {
        return shape_err(format!("cannot concat {:?} with {:?}", a.dims(), b.dims()));
    }
    let mut out = Tensor4::zeros([ba, ca + cb, ha, wa]);
    let na = ca * ha * wa;
    for bi in 0..ba {
        let dst = out.item_mut(bi);
        dst[..na].copy_from_slice(a.item(bi));
        dst[na..].copy_from_slice(b.item(bi));
    }
    Ok(out)
}

pub fn global_avg_pool(x: &Tensor4) -> Tensor4 {
    let [b, c, _, _] = x.dims();
    let p = x.plane_len() as f64;
    Tensor4::from_fn([b, c, 1, 1], |bi, ci, _, _| x.plane(bi, ci).iter().sum::<f64>() / p)
}

/// `y = W · flatten(x) + bias`; `weights` is `out × in`.
pub fn fully_connected(x: &Tensor4, weights: &ParamTensor, bias: &ParamTensor) -> Result<Tensor4> {
    let b = x.batch();
    let f = x.channels() * x.plane_len();
    if weights.shape != [weights.shape[0], f] {
        return shape_err(format!("FC weights {:?} do not match {f} features", weights.shape));
    }
    let o = weights.shape[0];
    let mut out = Tensor4::zeros([b, o, 1, 1]);
    for bi in 0..b {
        let src = x.item(bi);
        for oi in 0..o {
            let row = &weights.values[oi * f..(oi + 1) * f];
            let dot: f64 = row.iter().zip(src).map(|(a, b)| a * b).sum();
            out.data_mut()[bi * o + oi] = dot + bias.values[oi];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Layer structs

pub struct Conv3x3 {
    name: String,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
    pub weight: ParamTensor,
    input: Option<Tensor4>,
}

impl Conv3x3 {
    pub fn new(
        name: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        weight: ParamTensor,
    ) -> Self {
        assert_eq!(weight.len(), out_channels * in_channels * 9);
        Self {
            name: name.into(),
            in_channels,
            out_channels,
            stride,
            weight,
            input: None,
        }
    }
}

impl Layer for Conv3x3 {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        expect_channels(x, self.in_channels, &self.name)?;
        let [b, c, h, w] = x.dims();
        let (oh, ow) = (conv3x3_out(h, self.stride), conv3x3_out(w, self.stride));
        let mut out = Tensor4::zeros([b, self.out_channels, oh, ow]);
        let op = oh * ow;
        for bi in 0..b {
            for o in 0..self.out_channels {
                let start = (bi * self.out_channels + o) * op;
                for ci in 0..c {
                    let k = &self.weight.values[(o * c + ci) * 9..(o * c + ci) * 9 + 9];
                    correlate3x3(
                        x.plane(bi, ci),
                        h,
                        w,
                        k,
                        self.stride,
                        &mut out.data_mut()[start..start + op],
                        oh,
                        ow,
                    );
                }
            }
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, &self.name)?;
        let [b, c, h, w] = x.dims();
        let [_, _, oh, ow] = grad.dims();
        let mut gx = Tensor4::zeros(x.dims());
        let p = h * w;
        for bi in 0..b {
            for o in 0..self.out_channels {
                let g = grad.plane(bi, o);
                for ci in 0..c {
                    let kidx = (o * c + ci) * 9;
                    let start = (bi * c + ci) * p;
                    let learnable = self.weight.learnable;
                    let (vals, grads) = (&self.weight.values, &mut self.weight.grad);
                    correlate3x3_backward(
                        x.plane(bi, ci),
                        h,
                        w,
                        &vals[kidx..kidx + 9],
                        self.stride,
                        g,
                        oh,
                        ow,
                        &mut gx.data_mut()[start..start + p],
                        learnable.then(|| &mut grads[kidx..kidx + 9]),
                    );
                }
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight]
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight]
    }
}

pub struct DepthwiseConv3x3 {
    name: String,
    stride: usize,
    pub weight: ParamTensor,
    input: Option<Tensor4>,
}

impl DepthwiseConv3x3 {
    pub fn new(name: impl Into<String>, stride: usize, weight: ParamTensor) -> Self {
        Self {
            name: name.into(),
            stride,
            weight,
            input: None,
        }
    }
}

impl Layer for DepthwiseConv3x3 {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        let y = depthwise_conv3x3_forward(x, &self.weight, self.stride)
            .map_err(|e| Error::Shape(format!("{}: {e}", self.name)))?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, &self.name)?;
        let [b, c, h, w] = x.dims();
        let [_, _, oh, ow] = grad.dims();
        let mut gx = Tensor4::zeros(x.dims());
        let p = h * w;
        let learnable = self.weight.learnable;
        for bi in 0..b {
            for ci in 0..c {
                let start = (bi * c + ci) * p;
                let (vals, grads) = (&self.weight.values, &mut self.weight.grad);
                correlate3x3_backward(
                    x.plane(bi, ci),
                    h,
                    w,
                    &vals[ci * 9..ci * 9 + 9],
                    self.stride,
                    grad.plane(bi, ci),
                    oh,
                    ow,
                    &mut gx.data_mut()[start..start + p],
                    learnable.then(|| &mut grads[ci * 9..ci * 9 + 9]),
                );
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight]
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight]
    }
}

/// Learnable or random-constant 1×1 convolution.
pub struct PointwiseConv {
    name: String,
    pub weight: ParamTensor,
    input: Option<Tensor4>,
}

impl PointwiseConv {
    pub fn new(name: impl Into<String>, weight: ParamTensor) -> Self {
        assert_eq!(weight.shape.len(), 2);
        Self {
            name: name.into(),
            weight,
            input: None,
        }
    }
}

impl Layer for PointwiseConv {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        let y = pointwise_conv_forward(x, &self.weight).map_err(|e| Error::Shape(format!("{}: {e}", self.name)))?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, &self.name)?;
        let [b, n, h, w] = x.dims();
        let m = self.weight.shape[0];
        let p = h * w;
        let mut gx = Tensor4::zeros(x.dims());
        for bi in 0..b {
            let g = grad.item(bi);
            let src = x.item(bi);
            let gdst = gx.item_mut(bi);
            for mi in 0..m {
                let grow = &g[mi * p..(mi + 1) * p];
                for ni in 0..n {
                    let wv = self.weight.values[mi * n + ni];
                    let xs = &src[ni * p..(ni + 1) * p];
                    if self.weight.learnable {
                        self.weight.grad[mi * n + ni] += grow.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                    }
                    for (d, gv) in gdst[ni * p..(ni + 1) * p].iter_mut().zip(grow) {
                        *d += wv * gv;
                    }
                }
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight]
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight]
    }
}

/// Pointwise layer whose weights are a fixed transform basis. Holds no
/// parameters.
pub struct TransformPC {
    name: String,
    pub spec: TransformSpec,
}

impl TransformPC {
    pub fn new(name: impl Into<String>, spec: TransformSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            name: name.into(),
            spec,
        })
    }
}

impl Layer for TransformPC {
    fn name(&self) -> &str {
        &self.name
    }
    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        transform_pc_forward(x, &self.spec)
    }
    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        transform_pc_backward(grad, &self.spec)
    }
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Batch normalization with learnable per-channel scale and shift.
///
/// Training mode normalizes with batch statistics and updates running
/// estimates (`momentum = 0.1`, unbiased variance); eval mode uses the
/// running estimates.
pub struct BatchNorm {
    name: String,
    pub gamma: ParamTensor,
    pub beta: ParamTensor,
    pub running_mean: Buffer,
    pub running_var: Buffer,
    pub momentum: f64,
    pub eps: f64,
    xhat: Option<Tensor4>,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        let name = name.into();
        Self {
            gamma: ParamTensor::filled(format!("{name}.gamma"), vec![channels], 1.0),
            beta: ParamTensor::filled(format!("{name}.beta"), vec![channels], 0.0),
            running_mean: Buffer {
                name: format!("{name}.running_mean"),
                values: vec![0.0; channels],
            },
            running_var: Buffer {
                name: format!("{name}.running_var"),
                values: vec![1.0; channels],
            },
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            xhat: None,
            inv_std: vec![0.0; channels],
            mode: Mode::Train,
            name,
        }
    }

    pub fn with_group(mut self, group: &str) -> Self {
        self.gamma.weight_decay_group = group.to_string();
        self.beta.weight_decay_group = group.to_string();
        self
    }
}

impl Layer for BatchNorm {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor4, mode: Mode) -> Result<Tensor4> {
        let c = self.gamma.len();
        expect_channels(x, c, &self.name)?;
        let [b, _, _, _] = x.dims();
        let p = x.plane_len();
        let n = (b * p) as f64;
        let mut xhat = Tensor4::zeros(x.dims());
        let mut out = Tensor4::zeros(x.dims());
        for ci in 0..c {
            let (mean, inv_std) = match mode {
                Mode::Train => {
                    let mut sum = 0.0;
                    for bi in 0..b {
                        sum += x.plane(bi, ci).iter().sum::<f64>();
                    }
                    let mean = sum / n;
                    let mut ss = 0.0;
                    for bi in 0..b {
                        ss += x.plane(bi, ci).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                    }
                    let var = ss / n;
                    let unbiased = if n > 1.0 { ss / (n - 1.0) } else { var };
                    let m = self.momentum;
                    self.running_mean.values[ci] = (1.0 - m) * self.running_mean.values[ci] + m * mean;
                    self.running_var.values[ci] = (1.0 - m) * self.running_var.values[ci] + m * unbiased;
                    (mean, 1.0 / (var + self.eps).sqrt())
                }
                Mode::Eval => (
                    self.running_mean.values[ci],
                    1.0 / (self.running_var.values[ci] + self.eps).sqrt(),
                ),
            };
            self.inv_std[ci] = inv_std;
            let (g, be) = (self.gamma.values[ci], self.beta.values[ci]);
            for bi in 0..b {
                let start = (bi * c + ci) * p;
                for k in start..start + p {
                    let xh = (x.data()[k] - mean) * inv_std;
                    xhat.data_mut()[k] = xh;
                    out.data_mut()[k] = g * xh + be;
                }
            }
        }
        self.xhat = Some(xhat);
        self.mode = mode;
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let xhat = cached(&self.xhat, &self.name)?;
        let c = self.gamma.len();
        let [b, _, _, _] = xhat.dims();
        let p = xhat.plane_len();
        let n = (b * p) as f64;
        let mut gx = Tensor4::zeros(xhat.dims());
        for ci in 0..c {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for bi in 0..b {
                let start = (bi * c + ci) * p;
                for k in start..start + p {
                    sum_g += grad.data()[k];
                    sum_gx += grad.data()[k] * xhat.data()[k];
                }
            }
            self.gamma.grad[ci] += sum_gx;
            self.beta.grad[ci] += sum_g;
            let scale = self.gamma.values[ci] * self.inv_std[ci];
            for bi in 0..b {
                let start = (bi * c + ci) * p;
                for k in start..start + p {
                    gx.data_mut()[k] = match self.mode {
                        Mode::Train => scale * (grad.data()[k] - sum_g / n - xhat.data()[k] * sum_gx / n),
                        Mode::Eval => scale * grad.data()[k],
                    };
                }
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.gamma, &mut self.beta]
    }
    fn buffers(&self) -> Vec<&Buffer> {
        vec![&self.running_mean, &self.running_var]
    }
    fn buffers_mut(&mut self) -> Vec<&mut Buffer> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

pub struct Relu {
    name: String,
    input: Option<Tensor4>,
}

impl Relu {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            input: None,
        }
    }
}

impl Layer for Relu {
    fn name(&self) -> &str {
        &self.name
    }
    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        self.input = Some(x.clone());
        Ok(relu_forward(x))
    }
    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, &self.name)?;
        let mut g = grad.clone();
        for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
            if *xv <= 0.0 {
                *gv = 0.0;
            }
        }
        Ok(g)
    }
}

pub struct ChannelShuffle {
    name: String,
    groups: usize,
}

impl ChannelShuffle {
    pub fn new(name: impl Into<String>, groups: usize) -> Self {
        Self {
            name: name.into(),
            groups,
        }
    }
}

impl Layer for ChannelShuffle {
    fn name(&self) -> &str {
        &self.name
    }
    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        channel_shuffle(x, self.groups)
    }
    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        channel_unshuffle(grad, self.groups)
    }
}

pub struct GlobalAvgPool {
    name: String,
    dims: Option<[usize; 4]>,
}

impl GlobalAvgPool {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            dims: None,
        }
    }
}

impl Layer for GlobalAvgPool {
    fn name(&self) -> &str {
        &self.name
    }
    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        self.dims = Some(x.dims());
        Ok(global_avg_pool(x))
    }
    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let dims = self
            .dims
            .ok_or_else(|| Error::Shape(format!("{}: backward called before forward", self.name)))?;
        let p = (dims[2] * dims[3]) as f64;
        Ok(Tensor4::from_fn(dims, |b, c, _, _| grad.get(b, c, 0, 0) / p))
    }
}

pub struct FullyConnected {
    name: String,
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    input: Option<Tensor4>,
}

impl FullyConnected {
    pub fn new(name: impl Into<String>, weight: ParamTensor, bias: ParamTensor) -> Self {
        assert_eq!(bias.len(), weight.shape[0]);
        Self {
            name: name.into(),
            weight,
            bias,
            input: None,
        }
    }
}

impl Layer for FullyConnected {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor4, _mode: Mode) -> Result<Tensor4> {
        let y =
            fully_connected(x, &self.weight, &self.bias).map_err(|e| Error::Shape(format!("{}: {e}", self.name)))?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, &self.name)?;
        let b = x.batch();
        let f = x.channels() * x.plane_len();
        let o = self.weight.shape[0];
        let mut gx = Tensor4::zeros(x.dims());
        for bi in 0..b {
            let src = x.item(bi);
            for oi in 0..o {
                let g = grad.data()[bi * o + oi];
                self.bias.grad[oi] += g;
                let row = &self.weight.values[oi * f..(oi + 1) * f];
                let grow = &mut self.weight.grad[oi * f..(oi + 1) * f];
                for k in 0..f {
                    grow[k] += g * src[k];
                }
                let gdst = gx.item_mut(bi);
                for k in 0..f {
                    gdst[k] += g * row[k];
                }
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(dims: [usize; 4], seed: u64) -> Tensor4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor4::from_fn(dims, |_, _, _, _| rng.gen_range(-1.0..1.0))
    }

    /// Direct loop reference for a padded 3×3 depthwise correlation.
    fn depthwise_reference(x: &Tensor4, k: &[f64], stride: usize) -> Tensor4 {
        let [b, c, h, w] = x.dims();
        let (oh, ow) = (conv3x3_out(h, stride), conv3x3_out(w, stride));
        Tensor4::from_fn([b, c, oh, ow], |bi, ci, oi, oj| {
            let mut acc = 0.0;
            for kh in 0..3 {
                for kw in 0..3 {
                    let ii = (oi * stride + kh) as isize - 1;
                    let jj = (oj * stride + kw) as isize - 1;
                    if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                        acc += k[ci * 9 + kh * 3 + kw] * x.get(bi, ci, ii as usize, jj as usize);
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn depthwise_identity_kernel() {
        let x = rand_tensor([2, 3, 5, 4], 1);
        let mut k = vec![0.0; 27];
        for c in 0..3 {
            k[c * 9 + 4] = 1.0;
        }
        let w = ParamTensor::new("k", vec![3, 1, 3, 3], k, true);
        assert_eq!(depthwise_conv3x3_forward(&x, &w, 1).unwrap(), x);
    }

    #[test]
    fn depthwise_box_sum_interior() {
        let x = Tensor4::from_fn([1, 2, 5, 5], |_, _, _, _| 1.5);
        let w = ParamTensor::filled("k", vec![2, 1, 3, 3], 1.0);
        let y = depthwise_conv3x3_forward(&x, &w, 1).unwrap();
        for c in 0..2 {
            for i in 1..4 {
                for j in 1..4 {
                    assert!((y.get(0, c, i, j) - 13.5).abs() < 1e-12);
                }
            }
        }
        assert!((y.get(0, 0, 0, 0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn depthwise_matches_loop_reference() {
        for (stride, dims) in [
            (1, [2, 3, 6, 7]),
            (2, [2, 3, 6, 7]),
            (2, [1, 2, 5, 5]),
            (1, [1, 1, 1, 1]),
        ] {
            let x = rand_tensor(dims, 7);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let w = ParamTensor::uniform("k", vec![dims[1], 1, 3, 3], 1.0, &mut rng, true);
            let y = depthwise_conv3x3_forward(&x, &w, stride).unwrap();
            let r = depthwise_reference(&x, &w.values, stride);
            assert!(y.max_abs_diff(&r) < 1e-10);
        }
    }

    #[test]
    fn depthwise_channel_mismatch() {
        let x = rand_tensor([1, 3, 4, 4], 1);
        let w = ParamTensor::filled("k", vec![2, 1, 3, 3], 1.0);
        assert!(depthwise_conv3x3_forward(&x, &w, 1).is_err());
    }

    #[test]
    fn pointwise_examples() {
        let x = rand_tensor([2, 3, 2, 2], 3);
        let eye = ParamTensor::new("w", vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], true);
        assert_eq!(pointwise_conv_forward(&x, &eye).unwrap(), x);

        let x = Tensor4::from_channel_vector(&[3.0, 5.0]).unwrap();
        let w = ParamTensor::new("w", vec![2, 2], vec![1.0, 1.0, 1.0, -1.0], true);
        assert_eq!(pointwise_conv_forward(&x, &w).unwrap().data(), &[8.0, -2.0]);
    }

    #[test]
    fn relu_example() {
        let x = Tensor4::from_channel_vector(&[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn shuffle_round_trip() {
        let x = rand_tensor([2, 12, 2, 3], 5);
        for g in [1, 2, 3, 4, 6] {
            let s = channel_shuffle(&x, g).unwrap();
            assert_eq!(channel_unshuffle(&s, g).unwrap(), x);
        }
        let x = Tensor4::from_channel_vector(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(channel_shuffle(&x, 2).unwrap().data(), &[0.0, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn split_concat_round_trip() {
        let x = rand_tensor([2, 6, 3, 3], 11);
        let (a, b) = channel_split(&x).unwrap();
        assert_eq!(a.channels(), 3);
        assert_eq!(concat(&a, &b).unwrap(), x);
        assert!(channel_split(&rand_tensor([1, 3, 1, 1], 0)).is_err());
    }

    fn loss_of(layer: &mut dyn Layer, x: &Tensor4, probe: &Tensor4) -> f64 {
        layer.forward(x, Mode::Train).unwrap().dot(probe)
    }

    /// Central-difference check of d(probe · layer(x)) / dx and / dparams.
    fn check_layer(layer: &mut dyn Layer, x: &Tensor4, out_dims: [usize; 4], tol: f64) {
        let probe = rand_tensor(out_dims, 99);
        for p in layer.params_mut() {
            p.zero_grad();
        }
        layer.forward(x, Mode::Train).unwrap();
        let gx = layer.backward(&probe).unwrap();
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let fd = (loss_of(layer, &xp, &probe) - loss_of(layer, &xm, &probe)) / (2.0 * h);
            let a = gx.data()[i];
            assert!(
                (fd - a).abs() <= tol * fd.abs().max(a.abs()).max(1e-3),
                "input {i}: fd={fd} analytic={a}"
            );
        }
        let analytic: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();
        for (pi, grads) in analytic.iter().enumerate() {
            for (k, &a) in grads.iter().enumerate() {
                let orig = layer.params()[pi].values[k];
                layer.params_mut()[pi].values[k] = orig + h;
                let lp = loss_of(layer, x, &probe);
                layer.params_mut()[pi].values[k] = orig - h;
                let lm = loss_of(layer, x, &probe);
                layer.params_mut()[pi].values[k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                assert!(
                    (fd - a).abs() <= tol * fd.abs().max(a.abs()).max(1e-3),
                    "param {pi}[{k}]: fd={fd} analytic={a}"
                );
            }
        }
    }

    #[test]
    fn batchnorm_gradients() {
        let x = rand_tensor([3, 4, 3, 2], 21);
        let mut bn = BatchNorm::new("bn", 4);
        bn.gamma.values = vec![0.5, 1.5, -0.7, 2.0];
        bn.beta.values = vec![0.1, -0.2, 0.3, 0.0];
        check_layer(&mut bn, &x, [3, 4, 3, 2], 1e-5);
    }

    #[test]
    fn conv_and_depthwise_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for stride in [1, 2] {
            let x = rand_tensor([2, 3, 5, 4], 30 + stride as u64);
            let mut dw = DepthwiseConv3x3::new(
                "dw",
                stride,
                ParamTensor::uniform("w", vec![3, 1, 3, 3], 1.0, &mut rng, true),
            );
            let (oh, ow) = (conv3x3_out(5, stride), conv3x3_out(4, stride));
            check_layer(&mut dw, &x, [2, 3, oh, ow], 1e-6);
            let mut conv = Conv3x3::new(
                "c",
                3,
                2,
                stride,
                ParamTensor::uniform("w", vec![2, 3, 3, 3], 1.0, &mut rng, true),
            );
            check_layer(&mut conv, &x, [2, 2, oh, ow], 1e-6);
        }
    }

    #[test]
    fn pointwise_fc_pool_shuffle_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor([2, 4, 3, 3], 40);
        let mut pw = PointwiseConv::new("pw", ParamTensor::uniform("w", vec![6, 4], 1.0, &mut rng, true));
        check_layer(&mut pw, &x, [2, 6, 3, 3], 1e-6);
        let mut fc = FullyConnected::new(
            "fc",
            ParamTensor::uniform("w", vec![5, 36], 1.0, &mut rng, true),
            ParamTensor::uniform("b", vec![5], 1.0, &mut rng, true),
        );
        check_layer(&mut fc, &x, [2, 5, 1, 1], 1e-6);
        check_layer(&mut GlobalAvgPool::new("gap"), &x, [2, 4, 1, 1], 1e-6);
        check_layer(&mut ChannelShuffle::new("sh", 2), &x, [2, 4, 3, 3], 1e-6);
    }

    #[test]
    fn frozen_pointwise_gets_no_weight_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_tensor([2, 4, 2, 2], 41);
        let mut pw = PointwiseConv::new("pw", ParamTensor::uniform("w", vec![4, 4], 0.5, &mut rng, false));
        pw.forward(&x, Mode::Train).unwrap();
        pw.backward(&rand_tensor([2, 4, 2, 2], 42)).unwrap();
        assert!(pw.weight.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn batchnorm_eval_uses_running_stats() {
        let mut bn = BatchNorm::new("bn", 2);
        bn.running_mean.values = vec![1.0, -1.0];
        bn.running_var.values = vec![4.0, 1.0];
        bn.eps = 0.0;
        let x = Tensor4::from_channel_vector(&[3.0, 0.0]).unwrap();
        let y = bn.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0]);
    }

    #[test]
    fn batchnorm_running_update() {
        let mut bn = BatchNorm::new("bn", 1);
        let x = Tensor4::new([2, 1, 1, 1], vec![1.0, 3.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.values[0] - 0.2).abs() < 1e-12);
        // unbiased var of {1, 3} is 2
        assert!((bn.running_var.values[0] - (0.9 + 0.2)).abs() < 1e-12);
    }
}
