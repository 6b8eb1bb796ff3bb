//! Datasets: a raw binary image container, CIFAR binaries and a synthetic
//! channel-pattern generator.
//!
//! Raw binary layout (little endian):
//!
//! ```text
//! magic        8 bytes  "CTPCDATA"
//! count        u32
//! channels     u32
//! height       u32
//! width        u32
//! label_width  u32      1 or 2 bytes per label
//! record*      label (label_width bytes) + channels·height·width u8 pixels, CHW order
//! ```
//!
//! CIFAR-10 records are 1 label byte + 3072 pixels; CIFAR-100 records are a
//! coarse and a fine label byte + 3072 pixels (the fine label is used).

use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor4;
use crate::transforms::hadamard_matrix;

pub const RAW_MAGIC: &[u8; 8] = b"CTPCDATA";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Tensor4,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(images: Tensor4, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.batch() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.batch(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Malformed(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor4, Vec<usize>) {
        (
            self.images.select_batch(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let (images, labels) = self.batch(indices);
        Self {
            images,
            labels,
            num_classes: self.num_classes,
        }
    }

    /// Per-channel mean and standard deviation.
    pub fn channel_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let [b, c, _, _] = self.images.dims();
        let n = (b * self.images.plane_len()) as f64;
        let mut mean = vec![0.0; c];
        let mut std = vec![0.0; c];
        for ci in 0..c {
            let mut s = 0.0;
            for bi in 0..b {
                s += self.images.plane(bi, ci).iter().sum::<f64>();
            }
            mean[ci] = s / n;
            let mut ss = 0.0;
            for bi in 0..b {
                ss += self
                    .images
                    .plane(bi, ci)
                    .iter()
                    .map(|v| (v - mean[ci]).powi(2))
                    .sum::<f64>();
            }
            std[ci] = (ss / n).sqrt();
        }
        (mean, std)
    }

    /// `(x − mean) / std` per channel; zero deviations are treated as 1.
    pub fn normalize(&mut self, mean: &[f64], std: &[f64]) {
        let [b, c, _, _] = self.images.dims();
        let p = self.images.plane_len();
        let data = self.images.data_mut();
        for bi in 0..b {
            for ci in 0..c {
                let s = if std[ci] > 0.0 { std[ci] } else { 1.0 };
                let start = (bi * c + ci) * p;
                for v in &mut data[start..start + p] {
                    *v = (*v - mean[ci]) / s;
                }
            }
        }
    }
}

/// Normalizes both splits with statistics of the training split.
pub fn normalize_splits(train: &mut Dataset, eval: &mut Dataset) {
    let (mean, std) = train.channel_stats();
    train.normalize(&mean, &std);
    eval.normalize(&mean, &std);
}

// ---------------------------------------------------------------------------
// Binary formats

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Raw,
    Cifar10,
    Cifar100,
    /// TOML file holding a [`SyntheticSpec`].
    Synthetic,
}

impl FromStr for DatasetFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "raw" => Ok(Self::Raw),
            "cifar10" => Ok(Self::Cifar10),
            "cifar100" => Ok(Self::Cifar100),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(Error::Config(format!("unknown dataset format '{other}'"))),
        }
    }
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Decodes fixed-size records of `label_bytes` + `pixels` bytes.
fn decode_records(
    body: &[u8],
    count: usize,
    dims: [usize; 3],
    label_of: impl Fn(&[u8]) -> usize,
    label_bytes: usize,
    num_classes: usize,
) -> Result<Dataset> {
    let pixels = dims[0] * dims[1] * dims[2];
    let record = label_bytes + pixels;
    if body.len() < count * record {
        return Err(Error::Malformed(format!(
            "truncated dataset: {count} records need {} bytes, found {}",
            count * record,
            body.len()
        )));
    }
    let mut data = Vec::with_capacity(count * pixels);
    let mut labels = Vec::with_capacity(count);
    for r in body[..count * record].chunks_exact(record) {
        labels.push(label_of(&r[..label_bytes]));
        data.extend(r[label_bytes..].iter().map(|&v| v as f64 / 255.0));
    }
    Dataset::new(
        Tensor4::new([count, dims[0], dims[1], dims[2]], data)?,
        labels,
        num_classes,
    )
}

pub fn parse_raw(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 28 {
        return Err(Error::Malformed(format!(
            "raw dataset header needs 28 bytes, found {}",
            bytes.len()
        )));
    }
    if &bytes[..8] != RAW_MAGIC {
        return Err(Error::Malformed("raw dataset has bad magic".into()));
    }
    let [count, c, h, w, lw] = [8, 12, 16, 20, 24].map(|o| u32_at(bytes, o) as usize);
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Malformed(format!(
            "raw dataset has empty image dims {c}x{h}x{w}"
        )));
    }
    let label = |b: &[u8]| b.iter().rev().fold(0usize, |a, &x| (a << 8) | x as usize);
    let num_classes = match lw {
        1 | 2 => 1 << (8 * lw),
        _ => return Err(Error::Malformed(format!("label width must be 1 or 2, got {lw}"))),
    };
    let mut ds = decode_records(&bytes[28..], count, [c, h, w], label, lw, num_classes)?;
    ds.num_classes = ds.labels.iter().max().map_or(1, |m| m + 1);
    Ok(ds)
}

pub fn encode_raw(ds: &Dataset) -> Result<Vec<u8>> {
    let [b, c, h, w] = ds.images.dims();
    let lw: u32 = if ds.num_classes <= 256 { 1 } else { 2 };
    let mut out = Vec::with_capacity(28 + b * (c * h * w + 2));
    out.extend_from_slice(RAW_MAGIC);
    for v in [b, c, h, w, lw as usize] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for (i, &l) in ds.labels.iter().enumerate() {
        out.extend_from_slice(&(l as u16).to_le_bytes()[..lw as usize]);
        out.extend(
            ds.images
                .item(i)
                .iter()
                .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
        );
    }
    Ok(out)
}

pub fn parse_cifar(bytes: &[u8], format: DatasetFormat) -> Result<Dataset> {
    let (label_bytes, classes) = match format {
        DatasetFormat::Cifar10 => (1, 10),
        DatasetFormat::Cifar100 => (2, 100),
        _ => return Err(Error::Config(format!("{format:?} is not a CIFAR layout"))),
    };
    let record = label_bytes + 3072;
    if bytes.is_empty() || !bytes.len().is_multiple_of(record) {
        return Err(Error::Malformed(format!(
            "CIFAR file of {} bytes is not a whole number of {record}-byte records",
            bytes.len()
        )));
    }
    let ds = decode_records(
        bytes,
        bytes.len() / record,
        [3, 32, 32],
        |l| l[label_bytes - 1] as usize,
        label_bytes,
        256,
    )?;
    if let Some(&l) = ds.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Malformed(format!(
            "label {l} out of range for {classes} classes"
        )));
    }
    Ok(Dataset {
        num_classes: classes,
        ..ds
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadOptions {
    /// Fraction of a single-file dataset held out for evaluation.
    pub eval_fraction: f64,
    /// Shuffle seed applied before the split.
    pub seed: u64,
    /// Keep at most this many records.
    pub limit: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            eval_fraction: 0.2,
            seed: 0,
            limit: None,
        }
    }
}

/// Loads a dataset and returns normalized `(train, eval)` splits.
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat, opts: LoadOptions) -> Result<(Dataset, Dataset)> {
    let path = path.as_ref();
    if format == DatasetFormat::Synthetic {
        let text = std::fs::read_to_string(path)?;
        let spec: SyntheticSpec =
            toml::from_str(&text).map_err(|e| Error::Config(format!("synthetic spec: {}", e.message())))?;
        return synthetic_channel_patterns(&spec);
    }
    let bytes = std::fs::read(path)?;
    if bytes.is_empty() {
        return Err(Error::Malformed(format!("{} is empty", path.display())));
    }
    let ds = match format {
        DatasetFormat::Raw => parse_raw(&bytes)?,
        _ => parse_cifar(&bytes, format)?,
    };
    split_dataset(ds, opts)
}

/// Shuffles with `opts.seed`, truncates to `opts.limit`, splits off the eval
/// fraction and normalizes.
pub fn split_dataset(ds: Dataset, opts: LoadOptions) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&opts.eval_fraction) {
        return Err(Error::Config(format!(
            "eval fraction must be in [0, 1), got {}",
            opts.eval_fraction
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    if let Some(l) = opts.limit {
        order.truncate(l);
    }
    let n_eval = (order.len() as f64 * opts.eval_fraction).round() as usize;
    let (eval_idx, train_idx) = order.split_at(n_eval);
    if train_idx.is_empty() {
        return Err(Error::Malformed("dataset has no training records".into()));
    }
    let mut train = ds.subset(train_idx);
    let mut eval = ds.subset(eval_idx);
    normalize_splits(&mut train, &mut eval);
    Ok((train, eval))
}

// ---------------------------------------------------------------------------
// Synthetic channel-pattern task

/// Generator settings for the channel-pattern task.
///
/// Class `k` has `log2(classes)` bits; bit `j` switches pattern `j` on. A
/// pattern is a color vector (a row of a Hadamard matrix restricted to the
/// image channels) times a plane-wave texture with random phase. Each
/// present pattern gets a random amplitude, and i.i.d. Gaussian noise is
/// added to every pixel. The class is carried by which channel combinations
/// co-vary, not by any single channel's intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub channels: usize,
    pub size: usize,
    pub train_samples: usize,
    pub eval_samples: usize,
    /// Noise standard deviation (pattern amplitudes are around 1).
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 8,
            channels: 3,
            size: 32,
            train_samples: 1000,
            eval_samples: 200,
            noise: 0.5,
            seed: 0,
        }
    }
}

struct Pattern {
    color: Vec<f64>,
    direction: (f64, f64),
    frequency: f64,
}

fn patterns(bits: usize, channels: usize) -> Result<Vec<Pattern>> {
    let order = (bits + 1).max(channels).next_power_of_two();
    let h = hadamard_matrix(order.trailing_zeros())?;
    const DIRECTIONS: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)];
    Ok((0..bits)
        .map(|j| Pattern {
            color: (0..channels).map(|c| h.get(j + 1, c) as f64).collect(),
            direction: DIRECTIONS[j % 4],
            frequency: 1.0 + (j / 4) as f64,
        })
        .collect())
}

fn generate(spec: &SyntheticSpec, pats: &[Pattern], samples: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let (c, s) = (spec.channels, spec.size);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(format!("noise: {e}")))?;
    let mut images = Tensor4::zeros([samples, c, s, s]);
    let mut labels = Vec::with_capacity(samples);
    let tau = std::f64::consts::TAU;
    for b in 0..samples {
        let label = rng.gen_range(0..spec.classes);
        labels.push(label);
        for (j, p) in pats.iter().enumerate() {
            if label >> j & 1 == 0 {
                continue;
            }
            let amp = rng.gen_range(0.6..1.4);
            let phase = rng.gen_range(0.0..tau);
            for h in 0..s {
                for w in 0..s {
                    let t = (p.direction.0 * h as f64 + p.direction.1 * w as f64) / s as f64;
                    let v = amp * (tau * p.frequency * t + phase).cos();
                    for (ci, col) in p.color.iter().enumerate() {
                        let off = images.offset(b, ci, h, w);
                        images.data_mut()[off] += col * v;
                    }
                }
            }
        }
        for v in images.item_mut(b) {
            *v += noise.sample(rng);
        }
    }
    Dataset::new(images, labels, spec.classes)
}

/// Generates normalized `(train, eval)` splits of the channel-pattern task.
pub fn synthetic_channel_patterns(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    if spec.classes < 2 || !spec.classes.is_power_of_two() {
        return Err(Error::Config(format!(
            "classes must be a power of two >= 2, got {}",
            spec.classes
        )));
    }
    if spec.channels == 0 || spec.size == 0 || spec.train_samples == 0 {
        return Err(Error::Config(
            "channels, size and train_samples must be positive".into(),
        ));
    }
    let pats = patterns(spec.classes.trailing_zeros() as usize, spec.channels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = generate(spec, &pats, spec.train_samples, &mut rng)?;
    let mut eval = generate(spec, &pats, spec.eval_samples, &mut rng)?;
    normalize_splits(&mut train, &mut eval);
    Ok((train, eval))
}

// ---------------------------------------------------------------------------
// Augmentation

/// Random shift by up to 2 pixels (zero fill) and horizontal flip with
/// probability 1/2, independently per item.
pub fn augment_batch(x: &Tensor4, rng: &mut impl Rng) -> Tensor4 {
    let [b, c, h, w] = x.dims();
    let mut out = Tensor4::zeros(x.dims());
    for bi in 0..b {
        let dy = rng.gen_range(-2i64..=2);
        let dx = rng.gen_range(-2i64..=2);
        let flip = rng.gen_bool(0.5);
        for ci in 0..c {
            for i in 0..h {
                let si = i as i64 + dy;
                if si < 0 || si >= h as i64 {
                    continue;
                }
                for j in 0..w {
                    let sj = j as i64 + dx;
                    if sj < 0 || sj >= w as i64 {
                        continue;
                    }
                    let sj = if flip { w - 1 - sj as usize } else { sj as usize };
                    out.set(bi, ci, i, j, x.get(bi, ci, si as usize, sj));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_shapes() {
        let spec = SyntheticSpec::default();
        let (train, eval) = synthetic_channel_patterns(&spec).unwrap();
        assert_eq!(train.images.dims(), [1000, 3, 32, 32]);
        assert_eq!(eval.len(), 200);
        assert!(train.labels.iter().all(|&l| l < 8));
        let (m, s) = train.channel_stats();
        assert!(m.iter().all(|v| v.abs() < 1e-9));
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert_eq!(synthetic_channel_patterns(&spec).unwrap().0, train);
    }

    #[test]
    fn raw_round_trip() {
        let images = Tensor4::from_fn([3, 2, 2, 2], |b, c, h, w| {
            ((b * 8 + c * 4 + h * 2 + w) * 10) as f64 / 255.0
        });
        let ds = Dataset::new(images, vec![0, 2, 1], 3).unwrap();
        let bytes = encode_raw(&ds).unwrap();
        let back = parse_raw(&bytes).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert!(back.images.max_abs_diff(&ds.images) < 1e-12);
        assert!(matches!(parse_raw(&bytes[..bytes.len() - 1]), Err(Error::Malformed(_))));
        assert!(matches!(parse_raw(&[]), Err(Error::Malformed(_))));
    }

    #[test]
    fn cifar100_layout() {
        let mut bytes = Vec::new();
        for i in 0..4u8 {
            bytes.push(i);
            bytes.push(90 + i);
            bytes.extend(std::iter::repeat_n(i * 20, 3072));
        }
        let ds = parse_cifar(&bytes, DatasetFormat::Cifar100).unwrap();
        assert_eq!(ds.images.dims(), [4, 3, 32, 32]);
        assert_eq!(ds.labels, [90, 91, 92, 93]);
        assert!(parse_cifar(&bytes[..100], DatasetFormat::Cifar100).is_err());
        assert!(parse_cifar(&[], DatasetFormat::Cifar10).is_err());
        bytes[1] = 200;
        assert!(parse_cifar(&bytes, DatasetFormat::Cifar100).is_err());
    }

    #[test]
    fn augmentation_preserves_shape() {
        let x = Tensor4::from_fn([2, 3, 6, 6], |b, c, h, w| (b + c + h + w) as f64);
        let y = augment_batch(&x, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(y.dims(), x.dims());
    }
}
