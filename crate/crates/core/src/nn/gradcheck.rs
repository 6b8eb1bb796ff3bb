//! Central-difference gradient checking for whole networks.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::Mode;
use super::loss::softmax_cross_entropy;
use super::network::Network;
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors so that gradients which are zero up
/// to rounding do not blow the ratio up.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `(tensor name, max relative error)`, the input first.
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, e) in &self.per_tensor {
            writeln!(f, "{name:<32} {e:.3e}")?;
        }
        write!(
            f,
            "{} entries checked, max relative error {:.3e} at {} (tolerance {:.1e}): {}",
            self.checked,
            self.max_rel_error,
            self.worst,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

fn loss(net: &mut Network, x: &Tensor4, labels: &[usize]) -> Result<f64> {
    let y = net.forward(x, Mode::Train)?;
    let (l, _) = softmax_cross_entropy(&y, labels)?;
    if !l.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {l} during gradient check")));
    }
    Ok(l)
}

/// Compares analytic gradients of a softmax cross-entropy loss (labels
/// `b mod classes`) against central differences, for every learnable
/// parameter and for the input. Batch norm runs with batch statistics.
pub fn gradient_check(net: &mut Network, input: &Tensor4, tolerance: f64) -> Result<GradCheckReport> {
    let classes = net.output_shape().numel();
    let labels: Vec<usize> = (0..input.batch()).map(|b| b % classes).collect();

    net.zero_grad();
    let y = net.forward(input, Mode::Train)?;
    let (_, g) = softmax_cross_entropy(&y, &labels)?;
    let gx = net.backward(&g)?;
    let analytic: Vec<(String, bool, Vec<f64>)> = net
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.learnable, p.grad.clone()))
        .collect();

    let mut per_tensor = Vec::new();
    let mut checked = 0;

    let mut worst_input = 0.0f64;
    for i in 0..input.len() {
        let mut xp = input.clone();
        xp.data_mut()[i] += FD_STEP;
        let mut xm = input.clone();
        xm.data_mut()[i] -= FD_STEP;
        let fd = (loss(net, &xp, &labels)? - loss(net, &xm, &labels)?) / (2.0 * FD_STEP);
        worst_input = worst_input.max(relative_error(gx.data()[i], fd));
        checked += 1;
    }
    per_tensor.push(("input".to_string(), worst_input));

    for (pi, (name, learnable, grads)) in analytic.iter().enumerate() {
        if !learnable {
            continue;
        }
        let mut worst = 0.0f64;
        for (k, &g) in grads.iter().enumerate() {
            let orig = net.params()[pi].values[k];
            net.params_mut()[pi].values[k] = orig + FD_STEP;
            let lp = loss(net, input, &labels)?;
            net.params_mut()[pi].values[k] = orig - FD_STEP;
            let lm = loss(net, input, &labels)?;
            net.params_mut()[pi].values[k] = orig;
            worst = worst.max(relative_error(g, (lp - lm) / (2.0 * FD_STEP)));
            checked += 1;
        }
        per_tensor.push((name.clone(), worst));
    }

    let (worst, max_rel_error) = per_tensor.iter().fold((String::new(), 0.0f64), |(wn, we), (n, e)| {
        if *e > we {
            (n.clone(), *e)
        } else {
            (wn, we)
        }
    });
    if !max_rel_error.is_finite() {
        return Err(Error::Numerical(format!("non-finite relative error at {worst}")));
    }
    Ok(GradCheckReport {
        per_tensor,
        max_rel_error,
        worst,
        checked,
        tolerance,
    })
}

/// Random `N(0,1)`-ish input for gradient checks (sum of uniforms).
pub fn random_input(dims: [usize; 4], seed: u64) -> Tensor4 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor4::from_fn(dims, |_, _, _, _| (0..3).map(|_| rng.gen_range(-1.0..1.0)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{LayerSpec, NamedLayer, Shape, SpecNode};

    #[test]
    fn depthwise_pool_fc() {
        let nodes = vec![
            SpecNode::Layer(NamedLayer::new(
                "dw",
                LayerSpec::DepthwiseConv3x3 { channels: 3, stride: 1 },
            )),
            SpecNode::Layer(NamedLayer::new("gap", LayerSpec::GlobalAvgPool)),
            SpecNode::Layer(NamedLayer::new(
                "fc",
                LayerSpec::FullyConnected {
                    in_features: 3,
                    out_features: 4,
                },
            )),
        ];
        let mut net = Network::new(&nodes, Shape::new(3, 5, 5), 3).unwrap();
        let r = gradient_check(&mut net, &random_input([2, 3, 5, 5], 1), 1e-4).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.checked, 2 * 75 + 27 + 16);
    }
}
