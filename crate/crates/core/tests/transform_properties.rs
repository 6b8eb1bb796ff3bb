use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctpc::transforms::{
    count_ops, dct_kernel, dwht_fast_vec, dwht_naive, fast_dct, hadamard_matrix, op_count, transform_adjoint,
    transform_forward, Counted, PcEvaluation, TransformKind, TransformSpec,
};
use ctpc::Tensor4;

fn pow2() -> impl Strategy<Value = usize> {
    (0u32..=10).prop_map(|d| 1usize << d)
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_dwht_matches_dense(x in pow2().prop_flat_map(vec_of)) {
        let n = x.len();
        let fast = dwht_fast_vec(&x, n).unwrap();
        let dense = dwht_naive(&x, &TransformSpec::dwht(n, n).unwrap()).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs())) * n as f64;
        for (a, b) in fast.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn dwht_twice_is_n_times_identity(x in pow2().prop_flat_map(|n| prop::collection::vec(-1_000_000i64..1_000_000, n))) {
        let n = x.len();
        let twice = dwht_fast_vec(&dwht_fast_vec(&x, n).unwrap(), n).unwrap();
        let expect: Vec<i64> = x.iter().map(|v| v * n as i64).collect();
        prop_assert_eq!(twice, expect);
    }

    #[test]
    fn dwht_is_symmetric((x, y) in pow2().prop_flat_map(|n| (vec_of(n), vec_of(n)))) {
        let n = x.len();
        let lhs = dot(&dwht_fast_vec(&x, n).unwrap(), &y);
        let rhs = dot(&x, &dwht_fast_vec(&y, n).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn adjoint_identity_with_pad_and_truncate(
        kind in prop_oneof![Just(TransformKind::Dwht), Just(TransformKind::Dct)],
        n in 1usize..40,
        m in 1usize..40,
        hw in 1usize..3,
        seed in any::<u64>(),
    ) {
        let spec = TransformSpec::unchecked(kind, n, m, true, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor4::from_fn([2, n, hw, hw], |_, _, _, _| rng.gen_range(-1.0..1.0));
        let y = Tensor4::from_fn([2, m, hw, hw], |_, _, _, _| rng.gen_range(-1.0..1.0));
        let lhs = transform_forward(&x, &spec).unwrap().dot(&y);
        let rhs = x.dot(&transform_adjoint(&y, &spec).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn truncation_keeps_the_leading_outputs(x in pow2().prop_flat_map(vec_of), keep in 1usize..1024) {
        let n = x.len();
        let m = keep.min(n);
        let full = dwht_fast_vec(&x, n).unwrap();
        prop_assert_eq!(&dwht_fast_vec(&x, m).unwrap()[..], &full[..m]);
    }
}

#[test]
fn instrumented_fast_dct_matches_analytic_count() {
    for d in 0..=10u32 {
        let n = 1usize << d;
        let x: Vec<Counted> = (0..n).map(|i| Counted(i as f64 - 3.0)).collect();
        let (_, ops) = count_ops(|| fast_dct(&x).unwrap());
        assert_eq!(ops, op_count(PcEvaluation::FastDCT, n, n).unwrap(), "N = {n}");
    }
}

#[test]
fn instrumented_fast_dwht_is_multiplication_free() {
    for d in 0..=10u32 {
        let n = 1usize << d;
        let x: Vec<Counted> = (0..n).map(|i| Counted(i as f64)).collect();
        let (_, ops) = count_ops(|| dwht_fast_vec(&x, n).unwrap());
        assert_eq!(ops.multiplications, 0);
        assert_eq!(ops.add_sub(), n as u64 * d as u64);
    }
}

#[test]
fn dct_gram_is_diagonal() {
    for n in [2usize, 3, 8, 12, 64, 256] {
        let k = dct_kernel(n).unwrap();
        for a in 0..n {
            for b in 0..n {
                let g: f64 = (0..n).map(|x| k.get(a, x) * k.get(b, x)).sum();
                let want = match (a == b, a) {
                    (false, _) => 0.0,
                    (true, 0) => n as f64,
                    (true, _) => n as f64 / 2.0,
                };
                assert!((g - want).abs() <= 1e-9, "N = {n}, ({a}, {b}): {g}");
            }
        }
    }
}

fn sign_counts(row: impl Iterator<Item = f64>) -> (usize, usize) {
    row.fold((0, 0), |(p, q), v| {
        if v > 1e-12 {
            (p + 1, q)
        } else if v < -1e-12 {
            (p, q + 1)
        } else {
            (p, q)
        }
    })
}

#[test]
fn hadamard_rows_are_sign_balanced() {
    for d in 1..=9u32 {
        let h = hadamard_matrix(d).unwrap();
        for m in 1..h.size() {
            let (p, q) = sign_counts(h.row(m).iter().map(|&v| v as f64));
            assert_eq!(p, q, "N = {}, row {m}", h.size());
        }
    }
}

/// DCT rows m >= 1 are sign balanced for every power-of-two N. Other even N
/// have unbalanced rows (N = 6, m = 4 is `[.5, -1, .5, .5, -1, .5]`); those
/// are enumerated and reported, not asserted.
#[test]
fn dct_rows_are_sign_balanced_for_powers_of_two() {
    let mut exceptions = Vec::new();
    for n in (2..=512usize).step_by(2) {
        let k = dct_kernel(n).unwrap();
        for m in 1..n {
            let (p, q) = sign_counts(k.row(m).iter().copied());
            if p != q {
                assert!(!n.is_power_of_two(), "N = {n}, row {m}: {p} positive vs {q} negative");
                exceptions.push((n, m));
            }
        }
    }
    assert!(exceptions.contains(&(6, 4)));
    println!(
        "{} unbalanced (N, m) rows for even non-power-of-two N <= 512",
        exceptions.len()
    );
}

/// Zero-mean symmetric inputs give zero-mean outputs on every channel m >= 1.
#[test]
fn outputs_are_distributionally_symmetric() {
    let n = 16;
    let samples = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [TransformKind::Dwht, TransformKind::Dct] {
        let spec = TransformSpec::new(kind, n, n).unwrap();
        let x = Tensor4::from_fn([samples / 100, n, 10, 10], |_, _, _, _| rng.gen_range(-1.0..1.0));
        let y = transform_forward(&x, &spec).unwrap();
        for m in 1..n {
            let vals: Vec<f64> = (0..y.batch()).flat_map(|b| y.plane(b, m).to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            let se = (var / vals.len() as f64).sqrt();
            assert!(mean.abs() <= 3.0 * se, "{kind} channel {m}: mean {mean}, se {se}");
        }
    }
}
