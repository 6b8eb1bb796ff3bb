//! Operation counting.
//!
//! [`op_count`] gives closed-form per-location counts for each way of
//! evaluating a pointwise layer. [`Counted`] is a scalar that tallies every
//! arithmetic operation performed on it, so the closed forms can be checked
//! against what the kernels actually execute.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_traits::Zero;

use super::dct::DctScalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCount {
    pub multiplications: u64,
    pub additions: u64,
    pub subtractions: u64,
}

impl OpCount {
    pub const ZERO: OpCount = OpCount {
        multiplications: 0,
        additions: 0,
        subtractions: 0,
    };

    pub fn new(multiplications: u64, additions: u64, subtractions: u64) -> Self {
        Self {
            multiplications,
            additions,
            subtractions,
        }
    }

    /// FLOPs as multiplications + additions + subtractions.
    pub fn total(&self) -> u64 {
        self.multiplications + self.additions + self.subtractions
    }

    pub fn add_sub(&self) -> u64 {
        self.additions + self.subtractions
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self {
            multiplications: self.multiplications * k,
            additions: self.additions * k,
            subtractions: self.subtractions * k,
        }
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount {
            multiplications: self.multiplications + o.multiplications,
            additions: self.additions + o.additions,
            subtractions: self.subtractions + o.subtractions,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, o: OpCount) {
        *self = *self + o;
    }
}

impl std::iter::Sum for OpCount {
    fn sum<I: Iterator<Item = OpCount>>(iter: I) -> OpCount {
        iter.fold(OpCount::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for OpCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mul={} add={} sub={} total={}",
            self.multiplications,
            self.additions,
            self.subtractions,
            self.total()
        )
    }
}

/// How a pointwise layer is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PcEvaluation {
    /// Dense learnable (or frozen) weight matrix.
    NaivePC,
    /// Butterfly Walsh-Hadamard transform.
    FastDWHT,
    /// Dense DCT-II kernel multiply.
    NaiveDCT,
    /// Recursive even/odd DCT-II.
    FastDCT,
}

impl PcEvaluation {
    pub fn label(&self) -> &'static str {
        match self {
            PcEvaluation::NaivePC => "naive-pc",
            PcEvaluation::FastDWHT => "fast-dwht",
            PcEvaluation::NaiveDCT => "naive-dct",
            PcEvaluation::FastDCT => "fast-dct",
        }
    }
}

impl std::str::FromStr for PcEvaluation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "naive-pc" | "naivepc" | "pc" => Ok(PcEvaluation::NaivePC),
            "fast-dwht" | "fastdwht" | "dwht" => Ok(PcEvaluation::FastDWHT),
            "naive-dct" | "naivedct" => Ok(PcEvaluation::NaiveDCT),
            "fast-dct" | "fastdct" | "dct" => Ok(PcEvaluation::FastDCT),
            other => Err(Error::Config(format!("unknown layer kind '{other}'"))),
        }
    }
}

/// Per-spatial-location operation count of a pointwise layer with `n` inputs
/// and `m` outputs.
///
/// The fast paths transform a vector of length `max(n, m)` (inputs are
/// zero-padded first) and truncate afterwards, so their cost does not shrink
/// with `m`. Fast DCT uses the recursive even/odd split:
///
/// - `L/2 · log2 L` multiplications,
/// - `L · log2 L − L + 1` additions,
/// - `L/2 · log2 L` subtractions.
pub fn op_count(kind: PcEvaluation, n: usize, m: usize) -> Result<OpCount> {
    if n == 0 || m == 0 {
        return Err(Error::Shape(format!("channel counts must be >= 1, got {n}x{m}")));
    }
    let (n64, m64) = (n as u64, m as u64);
    match kind {
        PcEvaluation::NaivePC | PcEvaluation::NaiveDCT => Ok(OpCount::new(n64 * m64, (n64 - 1) * m64, 0)),
        PcEvaluation::FastDWHT => {
            let len = n.max(m);
            if !len.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(len));
            }
            let half_passes = (len as u64 / 2) * len.trailing_zeros() as u64;
            Ok(OpCount::new(0, half_passes, half_passes))
        }
        PcEvaluation::FastDCT => {
            let len = n.max(m);
            if !len.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(len));
            }
            let l = len as u64;
            let lg = len.trailing_zeros() as u64;
            // L·log2 L + 1 − L, ordered to stay non-negative at L = 1
            Ok(OpCount::new(l / 2 * lg, l * lg + 1 - l, l / 2 * lg))
        }
    }
}

thread_local! {
    static TALLY: Cell<OpCount> = const { Cell::new(OpCount::ZERO) };
}

fn bump(f: impl FnOnce(&mut OpCount)) {
    TALLY.with(|t| {
        let mut c = t.get();
        f(&mut c);
        t.set(c);
    });
}

/// Runs `f` and returns the arithmetic performed on [`Counted`] values
/// during the call, on the current thread.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpCount) {
    let saved = TALLY.with(|t| t.replace(OpCount::ZERO));
    let r = f();
    let counted = TALLY.with(|t| t.replace(saved));
    (r, counted)
}

/// An `f64` that records each add, subtract and multiply applied to it.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl Add for Counted {
    type Output = Counted;
    fn add(self, o: Counted) -> Counted {
        bump(|c| c.additions += 1);
        Counted(self.0 + o.0)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Sub for Counted {
    type Output = Counted;
    fn sub(self, o: Counted) -> Counted {
        bump(|c| c.subtractions += 1);
        Counted(self.0 - o.0)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for Counted {
    type Output = Counted;
    fn mul(self, o: Counted) -> Counted {
        bump(|c| c.multiplications += 1);
        Counted(self.0 * o.0)
    }
}

impl Zero for Counted {
    fn zero() -> Self {
        Counted(0.0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
}

impl DctScalar for Counted {
    fn from_f64(v: f64) -> Self {
        Counted(v)
    }
}
