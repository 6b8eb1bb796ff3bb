use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctpc::nn::gradcheck::{gradient_check, random_input};
use ctpc::nn::spec::{LayerSpec, NamedLayer, Shape, SpecNode};
use ctpc::nn::{pointwise_conv_forward, transform_pc_forward, Mode, Network, ParamTensor};
use ctpc::train::{Sgd, TrainConfig};
use ctpc::transforms::{hadamard_matrix, TransformKind, TransformSpec};
use ctpc::Tensor4;

fn layer(name: &str, spec: LayerSpec) -> SpecNode {
    SpecNode::Layer(NamedLayer::new(name, spec))
}

/// dw -> bn -> transform PC -> bn -> pool -> fc
fn small_net(kind: TransformKind, n: usize, m: usize) -> Vec<SpecNode> {
    vec![
        layer("dw", LayerSpec::DepthwiseConv3x3 { channels: n, stride: 1 }),
        layer("bn1", LayerSpec::BatchNorm { channels: n }),
        layer("pc", LayerSpec::TransformPC(TransformSpec::new(kind, n, m).unwrap())),
        layer("bn2", LayerSpec::BatchNorm { channels: m }),
        layer("pool", LayerSpec::GlobalAvgPool),
        layer(
            "fc",
            LayerSpec::FullyConnected {
                in_features: m,
                out_features: 3,
            },
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hadamard_weights_equal_transform_pc(d in 0u32..7, out_log in 0u32..7, hw in 1usize..4, seed in any::<u64>()) {
        let (n, m) = (1usize << d, 1usize << out_log);
        let len = n.max(m);
        let h = hadamard_matrix(len.trailing_zeros()).unwrap();
        // truncated M x N block of the L x L matrix
        let w: Vec<f64> = (0..m).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| h.get(r, c) as f64).collect();
        let w = ParamTensor::new("w", vec![m, n], w, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor4::from_fn([2, n, hw, hw], |_, _, _, _| rng.gen_range(-5.0..5.0));
        let dense = pointwise_conv_forward(&x, &w).unwrap();
        let fast = transform_pc_forward(&x, &TransformSpec::dwht(n, m).unwrap()).unwrap();
        prop_assert!(dense.max_abs_diff(&fast) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gradients_match_finite_differences(
        kind in prop_oneof![Just(TransformKind::Dwht), Just(TransformKind::Dct)],
        n_log in 1u32..4,
        m_log in 1u32..4,
        seed in 0u64..1000,
    ) {
        let (n, m) = (1usize << n_log, 1usize << m_log);
        let mut net = Network::new(&small_net(kind, n, m), Shape::new(n, 4, 4), seed).unwrap();
        let r = gradient_check(&mut net, &random_input([3, n, 4, 4], seed), 1e-4).unwrap();
        prop_assert!(r.passed(), "{}", r);
    }
}

#[test]
fn transform_pc_has_no_parameters_and_survives_optimizer_steps() {
    let nodes = small_net(TransformKind::Dwht, 8, 16);
    let mut net = Network::new(&nodes, Shape::new(8, 4, 4), 1).unwrap();
    assert!(net.params().iter().all(|p| !p.name.starts_with("pc.")));
    let x = random_input([4, 8, 4, 4], 2);
    let before = net.forward(&x, Mode::Eval).unwrap();
    // zero-gradient steps: nothing learnable moves, and the transform layer
    // has nothing the optimizer could touch
    let cfg = TrainConfig {
        weight_decay_default: 0.0,
        ..TrainConfig::default()
    };
    let mut opt = Sgd::new();
    for _ in 0..3 {
        net.zero_grad();
        opt.step(&mut net.params_mut(), 0.1, &cfg).unwrap();
    }
    assert_eq!(net.forward(&x, Mode::Eval).unwrap(), before);
}

#[test]
fn forward_is_deterministic() {
    let nodes = small_net(TransformKind::Dct, 4, 8);
    let x = random_input([2, 4, 5, 5], 3);
    let mut a = Network::new(&nodes, Shape::new(4, 5, 5), 9).unwrap();
    let mut b = Network::new(&nodes, Shape::new(4, 5, 5), 9).unwrap();
    let ya = a.forward(&x, Mode::Train).unwrap();
    assert_eq!(ya, b.forward(&x, Mode::Train).unwrap());
    assert_eq!(ya, a.forward(&x, Mode::Train).unwrap());
}
