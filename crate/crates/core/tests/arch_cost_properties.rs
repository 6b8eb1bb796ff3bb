use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctpc::arch::{apply_substitution, build, BlockVariant, Family, Level, NetworkSpec, SubstitutionScheme};
use ctpc::cost::{cost_nodes, count_flops, CostReport};
use ctpc::nn::spec::{LayerSpec, NamedLayer, Shape, SpecNode};
use ctpc::transforms::{OpCount, TransformKind, TransformSpec};

/// Family/width pairs whose channel counts are powers of two, so every
/// variant (including transform PCs) can be built.
const NETS: &[(Family, f64)] = &[
    (Family::ShuffleNetV2, 1.1),
    (Family::MobileNetV1, 0.5),
    (Family::MobileNetV1, 1.0),
    (Family::Tiny, 0.5),
    (Family::Tiny, 1.0),
];

fn base_net() -> impl Strategy<Value = NetworkSpec> {
    (0..NETS.len(), 2usize..120).prop_map(|(i, classes)| build(NETS[i].0, NETS[i].1, classes, (32, 32)).unwrap())
}

fn variant() -> impl Strategy<Value = BlockVariant> {
    let kind = prop_oneof![Just(TransformKind::Dwht), Just(TransformKind::Dct)];
    prop_oneof![
        Just(BlockVariant::baseline()),
        Just(BlockVariant::rcpc()),
        kind.clone().prop_map(BlockVariant::ctpc_relu),
        kind.prop_map(BlockVariant::ctpc),
    ]
}

fn scheme_for(net: &NetworkSpec) -> BoxedStrategy<SubstitutionScheme> {
    let eligible = net.eligible_blocks().len();
    let edge = (0..=eligible, any::<bool>()).prop_map(|(c, high)| {
        if high {
            SubstitutionScheme::high(c)
        } else {
            SubstitutionScheme::low(c)
        }
    });
    if net.mid_blocks().len() >= 7 {
        let mid = (prop_oneof![Just(3usize), Just(7)], any::<bool>()).prop_map(|(c, rear)| {
            SubstitutionScheme::new(c, if rear { Level::MidRear } else { Level::MidFront }).unwrap()
        });
        prop_oneof![edge, mid].boxed()
    } else {
        edge.boxed()
    }
}

fn net_variant_scheme() -> impl Strategy<Value = (NetworkSpec, BlockVariant, SubstitutionScheme)> {
    base_net().prop_flat_map(|net| {
        let s = scheme_for(&net);
        (Just(net), variant(), s)
    })
}

fn layer(name: &str, spec: LayerSpec) -> SpecNode {
    SpecNode::Layer(NamedLayer::new(name, spec))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn substituted_networks_validate((net, v, s) in net_variant_scheme()) {
        let out = apply_substitution(&net, v, s).unwrap();
        let shape = out.validate().unwrap();
        prop_assert_eq!(shape, Shape::new(net.num_classes, 1, 1));
    }

    #[test]
    fn substitution_is_idempotent_and_commutes_with_classes((net, v, s) in net_variant_scheme(), classes in 2usize..200) {
        let once = apply_substitution(&net, v, s).unwrap();
        prop_assert_eq!(&apply_substitution(&once, v, s).unwrap(), &once);
        let a = apply_substitution(&net.clone().with_num_classes(classes), v, s).unwrap();
        let b = once.with_num_classes(classes);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ctpc_removes_exactly_the_pc_weights(
        (net, _, s) in net_variant_scheme().prop_filter("needs a block", |(_, _, s)| s.count > 0),
        kind in prop_oneof![Just(TransformKind::Dwht), Just(TransformKind::Dct)],
    ) {
        let base = count_flops(&net, net.input_size).unwrap();
        let sub = count_flops(&apply_substitution(&net, BlockVariant::ctpc(kind), s).unwrap(), net.input_size).unwrap();
        let removed: u64 = base
            .per_layer
            .iter()
            .filter(|l| sub.per_layer.iter().any(|m| m.name == l.name && m.kind == "TransformPC"))
            .inspect(|l| assert_eq!(l.kind, "PointwiseConv"))
            .map(|l| l.params)
            .sum();
        prop_assert!(removed > 0);
        prop_assert_eq!(base.totals.params - sub.totals.params, removed);
    }

    #[test]
    fn pc_to_dwht_cost_delta(n_log in 0u32..9, m_log in 0u32..9, h in 1usize..9, w in 1usize..9) {
        let (n, m) = (1usize << n_log, 1usize << m_log);
        let input = Shape::new(n, h, w);
        let pc = cost_nodes("pc", &[layer("pc", LayerSpec::PointwiseConv { in_channels: n, out_channels: m, frozen: false })], input).unwrap();
        let tr = cost_nodes("tr", &[layer("pc", LayerSpec::TransformPC(TransformSpec::dwht(n, m).unwrap()))], input).unwrap();
        let locs = (h * w) as u64;
        let (n64, m64) = (n as u64, m as u64);
        prop_assert_eq!(pc.totals.params - tr.totals.params, n64 * m64);
        prop_assert_eq!(pc.per_layer[0].ops, OpCount::new(n64 * m64, (n64 - 1) * m64, 0).scaled(locs));
        let l = n.max(m) as u64;
        let half = l / 2 * l.trailing_zeros() as u64;
        prop_assert_eq!(tr.per_layer[0].ops, OpCount::new(0, half, half).scaled(locs));
        prop_assert_eq!(tr.totals.params, 0);
    }

    #[test]
    fn conv_prefix_flops_scale_by_four((net, v, s) in net_variant_scheme(), k in 1usize..3) {
        let net = apply_substitution(&net, v, s).unwrap();
        let nodes = net.to_nodes().unwrap();
        let cut = nodes.iter().position(|n| matches!(n, SpecNode::Layer(l) if l.name == "pool")).unwrap();
        let prefix = &nodes[..cut];
        let side = 16 * k;
        let small = cost_nodes("small", prefix, Shape::new(3, side, side)).unwrap();
        let large = cost_nodes("large", prefix, Shape::new(3, 2 * side, 2 * side)).unwrap();
        prop_assert_eq!(large.totals.flops, 4 * small.totals.flops);
        prop_assert_eq!(large.totals.params, small.totals.params);
    }

    #[test]
    fn totals_ignore_layer_order((net, v, s) in net_variant_scheme(), seed in any::<u64>()) {
        let r = count_flops(&apply_substitution(&net, v, s).unwrap(), (32, 32)).unwrap();
        let mut layers = r.per_layer.clone();
        layers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let p = CostReport::from_layers("shuffled", r.input_size, layers);
        prop_assert_eq!(p.totals, r.totals);
    }
}
