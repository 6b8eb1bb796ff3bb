//! Self-check matrix: oracle equivalences, operation counts, adjoints,
//! gradient checks and cost targets, each reported as one row.

use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{TargetFile, Verdict};
use crate::error::Result;
use crate::nn::gradcheck::{gradient_check, random_input};
use crate::nn::spec::{LayerSpec, NamedLayer, Shape, SpecNode};
use crate::nn::{pointwise_conv_forward, Network, ParamTensor};
use crate::tensor::Tensor4;
use crate::transforms::{
    count_ops, dct_fast_vec, dct_kernel, dct_naive, dwht_fast, dwht_fast_vec, hadamard_matrix, op_count,
    transform_adjoint, transform_forward, Counted, HadamardMatrix, PcEvaluation, TransformKind, TransformSpec,
};

/// Where cost targets come from.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum TargetSource {
    #[default]
    Bundled,
    File(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    pub targets: TargetSource,
    /// Flip one entry of the reference Hadamard matrix (negative control:
    /// the oracle check must then fail).
    pub perturb_hadamard: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<9} {:<44} {}", self.verdict.to_string(), self.name, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.checks.iter().filter(|c| c.verdict == v).count()
    }

    fn push(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        });
    }

    fn push_result(&mut self, name: &str, r: Result<(bool, String)>) {
        match r {
            Ok((ok, detail)) => self.push(name, ok, detail),
            Err(e) => self.push(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(
            f,
            "{} passed, {} failed, {} unchecked",
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::Unchecked)
        )
    }
}

fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Max |fast − dense| over random vectors for N = 2..1024, against
/// `reference(log2 N)`.
pub fn hadamard_oracle_deviation(
    seed: u64,
    trials: usize,
    reference: impl Fn(u32) -> Result<HadamardMatrix>,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for d in 1..=10u32 {
        let h = reference(d)?;
        let n = 1usize << d;
        for _ in 0..trials {
            let x = random_vec(&mut rng, n);
            let fast = dwht_fast_vec(&x, n)?;
            let dense = h.apply(&x);
            worst = fast.iter().zip(&dense).fold(worst, |w, (a, b)| w.max((a - b).abs()));
        }
    }
    Ok(worst)
}

/// Instrumented fast DWHT vs the analytic count for N = 1..1024.
pub fn check_op_counts() -> Result<(bool, String)> {
    for d in 0..=10u32 {
        let n = 1usize << d;
        let x: Vec<Counted> = (0..n).map(|i| Counted(i as f64)).collect();
        let (_, ops) = count_ops(|| dwht_fast_vec(&x, n));
        let analytic = op_count(PcEvaluation::FastDWHT, n, n)?;
        if ops.multiplications != 0 || ops.add_sub() != (n as u64) * d as u64 || ops != analytic {
            return Ok((false, format!("N = {n}: counted {ops}, analytic {analytic}")));
        }
    }
    Ok((true, "0 mults and N·log2 N add/sub for N = 1..1024".into()))
}

/// Max relative deviation of the fast DCT from the dense kernel for
/// N = 8..512.
pub fn dct_deviation(seed: u64, trials: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for d in 3..=9u32 {
        let n = 1usize << d;
        let k = dct_kernel(n)?;
        for _ in 0..trials {
            let x = random_vec(&mut rng, n);
            let fast = dct_fast_vec(&x, n)?;
            let dense = k.apply(&x);
            let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst = fast
                .iter()
                .zip(&dense)
                .fold(worst, |w, (a, b)| w.max((a - b).abs() / scale));
        }
    }
    Ok(worst)
}

fn check_dct(seed: u64) -> Result<(bool, String)> {
    let worst = dct_deviation(seed, 5)?;
    Ok((
        worst <= 1e-4,
        format!("max relative deviation {worst:.2e} for N = 8..512"),
    ))
}

pub fn check_involution() -> Result<(bool, String)> {
    for d in 0..=10u32 {
        let n = 1usize << d;
        let x: Vec<i64> = (0..n as i64).map(|i| (i * 7919) % 201 - 100).collect();
        let twice = dwht_fast_vec(&dwht_fast_vec(&x, n)?, n)?;
        if twice.iter().zip(&x).any(|(a, b)| *a != n as i64 * b) {
            return Ok((false, format!("H·H·x != N·x at N = {n}")));
        }
    }
    Ok((true, "H·H·x = N·x exactly for integer x, N = 1..1024".into()))
}

/// Max |<T x, y> - <x, T' y>| over `pairs` random pairs per transform,
/// spread across square, padded and truncated shapes.
pub fn adjoint_deviation(seed: u64, pairs: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for kind in [TransformKind::Dwht, TransformKind::Dct] {
        for (n, m, fast, pad) in [
            (8, 8, true, false),
            (5, 8, true, false),
            (16, 4, true, false),
            (3, 2, true, true),
            (32, 64, true, false),
            (6, 3, false, kind == TransformKind::Dwht),
        ] {
            let spec = TransformSpec::unchecked(kind, n, m, fast, pad);
            spec.validate()?;
            for _ in 0..pairs.div_ceil(6) {
                let x = Tensor4::from_fn([1, n, 2, 2], |_, _, _, _| rng.gen_range(-1.0..1.0));
                let y = Tensor4::from_fn([1, m, 2, 2], |_, _, _, _| rng.gen_range(-1.0..1.0));
                let lhs = transform_forward(&x, &spec)?.dot(&y);
                let rhs = x.dot(&transform_adjoint(&y, &spec)?);
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

fn check_adjoint(seed: u64) -> Result<(bool, String)> {
    let worst = adjoint_deviation(seed, 100)?;
    Ok((worst <= 1e-10, format!("max |<Tx,y> - <x,T'y>| = {worst:.2e}")))
}

fn check_pointwise_equivalence(seed: u64) -> Result<(bool, String)> {
    let h = hadamard_matrix(4)?;
    let w = ParamTensor::new(
        "h",
        vec![16, 16],
        (0..256).map(|i| h.get(i / 16, i % 16) as f64).collect(),
        false,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor4::from_fn([2, 16, 3, 3], |_, _, _, _| rng.gen_range(-1.0..1.0));
    let dev = pointwise_conv_forward(&x, &w)?.max_abs_diff(&dwht_fast(&x, 16)?);
    Ok((dev <= 1e-10, format!("max deviation {dev:.2e}")))
}

/// Depthwise conv, batch norm and a DWHT transform PC feeding pool + FC.
pub fn gradcheck_network() -> Vec<SpecNode> {
    let l = |name: &str, spec| SpecNode::Layer(NamedLayer::new(name, spec));
    vec![
        l("dw", LayerSpec::DepthwiseConv3x3 { channels: 4, stride: 1 }),
        l("bn1", LayerSpec::BatchNorm { channels: 4 }),
        l(
            "pc",
            LayerSpec::TransformPC(TransformSpec::dwht(4, 8).expect("valid spec")),
        ),
        l("bn2", LayerSpec::BatchNorm { channels: 8 }),
        l("pool", LayerSpec::GlobalAvgPool),
        l(
            "fc",
            LayerSpec::FullyConnected {
                in_features: 8,
                out_features: 3,
            },
        ),
    ]
}

pub fn check_gradients(seed: u64) -> Result<(bool, String)> {
    let mut net = Network::new(&gradcheck_network(), Shape::new(4, 5, 5), seed)?;
    let r = gradient_check(&mut net, &random_input([3, 4, 5, 5], seed), 1e-4)?;
    Ok((
        r.passed(),
        format!(
            "{} entries, max relative error {:.2e} ({})",
            r.checked, r.max_rel_error, r.worst
        ),
    ))
}

fn short(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.3}M", v / 1e6)
    } else {
        format!("{v:.2}")
    }
}

/// Runs every check. Cost targets that cannot be loaded are reported as
/// unchecked; everything else still runs.
pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let mut rep = VerifyReport::default();
    let perturb = opts.perturb_hadamard;
    let oracle = hadamard_oracle_deviation(opts.seed, 20, |d| {
        let mut h = hadamard_matrix(d)?;
        if perturb {
            let v = h.get(1, 1);
            h.set(1, 1, -v);
        }
        Ok(h)
    });
    rep.push_result(
        "transform: fast DWHT = dense Hadamard",
        oracle.map(|w| (w <= 1e-10, format!("max deviation {w:.2e} for N = 2..1024"))),
    );
    rep.push_result("transform: DWHT multiplication-free", check_op_counts());
    rep.push_result("transform: fast DCT = DCT-II kernel", check_dct(opts.seed));
    rep.push_result("transform: DWHT involution", check_involution());
    rep.push_result("transform: adjoint identity", check_adjoint(opts.seed));
    rep.push_result(
        "transform: naive DCT oracle consistent",
        (|| {
            let spec = TransformSpec::dct(8, 8)?.with_fast(false)?;
            let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
            let a = dct_naive(&x, &spec)?;
            let b = dct_fast_vec(&x, 8)?;
            let dev = a.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            Ok((dev < 1e-9, format!("max deviation {dev:.2e}")))
        })(),
    );
    rep.push_result(
        "nn: Hadamard-weight PC = transform PC",
        check_pointwise_equivalence(opts.seed),
    );
    rep.push_result("nn: finite-difference gradient check", check_gradients(opts.seed));

    let targets = match &opts.targets {
        TargetSource::Bundled => Ok(TargetFile::bundled()),
        TargetSource::File(p) => TargetFile::load(p),
    };
    match targets.and_then(|t| t.evaluate()) {
        Ok(comparisons) => {
            for c in comparisons {
                let detail = match (c.deviation, c.expected) {
                    (Some(d), Some(e)) => {
                        let unit = if c.metric.ends_with("reduction") { "pp" } else { "%" };
                        format!(
                            "measured {}, expected {}, deviation {d:+.2}{unit} (tol {}{unit})",
                            short(c.measured),
                            short(e),
                            c.tolerance
                        )
                    }
                    _ => "no reference value".into(),
                };
                rep.checks.push(CheckResult {
                    name: format!("cost: {} {}", c.target, c.metric),
                    verdict: c.verdict,
                    detail,
                });
            }
        }
        Err(e) => rep.checks.push(CheckResult {
            name: "cost: targets".into(),
            verdict: Verdict::Unchecked,
            detail: format!("targets unavailable ({e})"),
        }),
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_run_passes() {
        let r = run_verify(&VerifyOptions::default());
        assert!(r.passed(), "{r}");
        // the bundled file has one target without a FLOP figure
        let unchecked: Vec<_> = r.checks.iter().filter(|c| c.verdict == Verdict::Unchecked).collect();
        assert_eq!(unchecked.len(), 1, "{r}");
        assert!(unchecked[0].name.starts_with("cost: "));
    }

    #[test]
    fn perturbed_hadamard_is_caught() {
        let r = run_verify(&VerifyOptions {
            perturb_hadamard: true,
            targets: TargetSource::File("/nonexistent/targets.toml".into()),
            ..VerifyOptions::default()
        });
        assert!(!r.passed());
        assert_eq!(r.checks[0].verdict, Verdict::Fail);
        assert!(r.checks[1..].iter().all(|c| c.verdict != Verdict::Fail), "{r}");
        assert_eq!(r.checks.last().unwrap().verdict, Verdict::Unchecked);
    }
}
