//! Wall-clock and analytic cost of pointwise layer evaluations.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{pointwise_conv_forward, ParamTensor};
use crate::tensor::Tensor4;
use crate::transforms::{dct_apply, dwht_fast, op_count, OpCount, PcEvaluation, TransformKind, TransformSpec};

/// Spatial locations processed per timed call (an 8×8 feature map).
pub const BENCH_LOCATIONS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub kind: PcEvaluation,
    pub n: usize,
    /// Median wall time per spatial location.
    pub ns_per_op: f64,
    pub ops: OpCount,
}

/// Median nanoseconds per location of an `n → n` pointwise layer over
/// `reps` timed repetitions.
pub fn time_per_location(kind: PcEvaluation, n: usize, reps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor4::from_fn([1, n, 8, 8], |_, _, _, _| rng.gen_range(-1.0..1.0));
    let run: Box<dyn Fn() -> Result<Tensor4>> = match kind {
        PcEvaluation::NaivePC => {
            let w = ParamTensor::new(
                "w",
                vec![n, n],
                (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                false,
            );
            Box::new(move || pointwise_conv_forward(&x, &w))
        }
        PcEvaluation::FastDWHT => Box::new(move || dwht_fast(&x, n)),
        PcEvaluation::NaiveDCT | PcEvaluation::FastDCT => {
            let spec = TransformSpec::unchecked(TransformKind::Dct, n, n, kind == PcEvaluation::FastDCT, false);
            spec.validate()?;
            Box::new(move || dct_apply(&x, &spec))
        }
    };
    // aim for ~1e6 scalar operations per timed rep
    let work = op_count(kind, n, n)?.total().max(n as u64) * BENCH_LOCATIONS as u64;
    let iters = (1_000_000 / work.max(1)).max(1) as usize;
    black_box(run()?);
    let mut samples = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        for _ in 0..iters {
            black_box(run()?);
        }
        samples.push(t.elapsed().as_nanos() as f64 / (iters * BENCH_LOCATIONS) as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

/// One row per `(kind, n)`. Non-power-of-two `n` is skipped for the fast
/// paths.
pub fn run_bench(kinds: &[PcEvaluation], sizes: &[usize], reps: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for &n in sizes {
            let fast = matches!(kind, PcEvaluation::FastDWHT | PcEvaluation::FastDCT);
            if fast && !n.is_power_of_two() {
                continue;
            }
            rows.push(BenchRow {
                kind,
                n,
                ns_per_op: time_per_location(kind, n, reps, n as u64)?,
                ops: op_count(kind, n, n)?,
            });
        }
    }
    Ok(rows)
}

/// CSV columns: `kind,n,ns_per_op,mult,add,sub,flops`.
pub fn write_bench_csv(rows: &[BenchRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| crate::Error::Io(e.into());
    out.write_record(["kind", "n", "ns_per_op", "mult", "add", "sub", "flops"])
        .map_err(io)?;
    for r in rows {
        out.write_record([
            r.kind.label().to_string(),
            r.n.to_string(),
            format!("{:.3}", r.ns_per_op),
            r.ops.multiplications.to_string(),
            r.ops.additions.to_string(),
            r.ops.subtractions.to_string(),
            r.ops.total().to_string(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_carry_analytic_counts() {
        let rows = run_bench(&[PcEvaluation::NaivePC, PcEvaluation::FastDWHT], &[1, 3, 8], 1).unwrap();
        assert_eq!(rows.len(), 5);
        let fast1 = rows
            .iter()
            .find(|r| r.kind == PcEvaluation::FastDWHT && r.n == 1)
            .unwrap();
        assert_eq!(fast1.ops.total(), 0);
        let naive8 = rows
            .iter()
            .find(|r| r.kind == PcEvaluation::NaivePC && r.n == 8)
            .unwrap();
        assert_eq!(naive8.ops, OpCount::new(64, 56, 0));
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("kind,n,ns_per_op,mult,add,sub,flops\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
