//! Baseline network builders, adapted to 32×32 inputs: the stem conv has
//! stride 1 and there is no stem max-pool.

use super::{BlockKind, BlockSpec, BlockVariant, Family, NetworkSpec};
use crate::error::{Error, Result};

/// `(output channels, stride)` of the 13 MobileNet-V1 separable blocks at 1x.
pub const MOBILENET_V1_BLOCKS: [(usize, usize); 13] = [
    (64, 1),
    (128, 2),
    (128, 1),
    (256, 2),
    (256, 1),
    (512, 2),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (1024, 2),
    (1024, 1),
];

/// Stride-1 units per ShuffleNet-V2 stage (each stage opens with one
/// stride-2 unit).
pub const SHUFFLENET_V2_REPEATS: [usize; 3] = [3, 7, 3];

const SHUFFLENET_STEM: usize = 24;
const SHUFFLENET_FINAL: usize = 1024;
const MOBILENET_STEM: usize = 32;
const TINY_CHANNELS: usize = 16;

fn same_width(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

fn unsupported(family: Family, width: f64, allowed: &str) -> Error {
    Error::Config(format!(
        "{family} does not support width {width} (supported: {allowed})"
    ))
}

fn check_common(num_classes: usize, input_size: (usize, usize)) -> Result<()> {
    if num_classes == 0 {
        return Err(Error::Config("num_classes must be positive".into()));
    }
    if input_size.0 == 0 || input_size.1 == 0 {
        return Err(Error::Config("input size must be positive".into()));
    }
    Ok(())
}

/// ShuffleNet-V2: stem conv, three stages of one stride-2 unit followed by
/// 3, 7 and 3 stride-1 units, a 1×1 conv to 1024 channels, pooling and FC.
///
/// Width 1.1 uses stage outputs 128 / 256 / 512 so that every branch width is
/// a power of two.
pub fn build_shufflenet_v2(width: f64, num_classes: usize, input_size: (usize, usize)) -> Result<NetworkSpec> {
    check_common(num_classes, input_size)?;
    let stages: [usize; 3] = match width {
        w if same_width(w, 0.5) => [48, 96, 192],
        w if same_width(w, 1.0) => [116, 232, 464],
        w if same_width(w, 1.1) => [128, 256, 512],
        w if same_width(w, 1.5) => [176, 352, 704],
        _ => return Err(unsupported(Family::ShuffleNetV2, width, "0.5, 1.0, 1.1, 1.5")),
    };
    let mut blocks = Vec::new();
    let mut cin = SHUFFLENET_STEM;
    for (si, (&cout, &repeats)) in stages.iter().zip(&SHUFFLENET_V2_REPEATS).enumerate() {
        let stage = si + 2;
        for u in 0..=repeats {
            blocks.push(BlockSpec {
                name: format!("s{stage}.u{u}"),
                kind: BlockKind::ShuffleUnit,
                in_channels: if u == 0 { cin } else { cout },
                out_channels: cout,
                stride: if u == 0 { 2 } else { 1 },
                variant: BlockVariant::baseline(),
                stage,
                mid: stage == 3,
            });
        }
        cin = cout;
    }
    Ok(NetworkSpec {
        family: Family::ShuffleNetV2,
        width,
        num_classes,
        input_size,
        stem_channels: SHUFFLENET_STEM,
        blocks,
        final_channels: Some(SHUFFLENET_FINAL),
    })
}

/// MobileNet-V1: stem conv, 13 depthwise separable blocks, pooling and FC.
/// The middle level is the seven blocks 3..=9.
pub fn build_mobilenet_v1(width: f64, num_classes: usize, input_size: (usize, usize)) -> Result<NetworkSpec> {
    check_common(num_classes, input_size)?;
    if ![0.5, 1.0, 2.0].iter().any(|&w| same_width(w, width)) {
        return Err(unsupported(Family::MobileNetV1, width, "0.5, 1.0, 2.0"));
    }
    let scale = |c: usize| (c as f64 * width).round() as usize;
    let stem = scale(MOBILENET_STEM);
    let mut cin = stem;
    let blocks = MOBILENET_V1_BLOCKS
        .iter()
        .enumerate()
        .map(|(i, &(c, stride))| {
            let cout = scale(c);
            let b = BlockSpec {
                name: format!("block{i}"),
                kind: BlockKind::Separable,
                in_channels: cin,
                out_channels: cout,
                stride,
                variant: BlockVariant::baseline(),
                stage: 0,
                mid: (3..=9).contains(&i),
            };
            cin = cout;
            b
        })
        .collect();
    Ok(NetworkSpec {
        family: Family::MobileNetV1,
        width,
        num_classes,
        input_size,
        stem_channels: stem,
        blocks,
        final_channels: None,
    })
}

/// Small separable network for desk-scale experiments: a 3×3 stem to
/// `16·width` channels and two stride-1 separable blocks.
pub fn build_tiny(width: f64, num_classes: usize, input_size: (usize, usize)) -> Result<NetworkSpec> {
    check_common(num_classes, input_size)?;
    let c = (TINY_CHANNELS as f64 * width).round() as usize;
    if width.is_nan() || width <= 0.0 || c < 2 {
        return Err(unsupported(Family::Tiny, width, "any width giving at least 2 channels"));
    }
    let blocks = (0..2)
        .map(|i| BlockSpec {
            name: format!("block{i}"),
            kind: BlockKind::Separable,
            in_channels: c,
            out_channels: c,
            stride: 1,
            variant: BlockVariant::baseline(),
            stage: 0,
            mid: false,
        })
        .collect();
    Ok(NetworkSpec {
        family: Family::Tiny,
        width,
        num_classes,
        input_size,
        stem_channels: c,
        blocks,
        final_channels: None,
    })
}

pub fn build(family: Family, width: f64, num_classes: usize, input_size: (usize, usize)) -> Result<NetworkSpec> {
    match family {
        Family::ShuffleNetV2 => build_shufflenet_v2(width, num_classes, input_size),
        Family::MobileNetV1 => build_mobilenet_v1(width, num_classes, input_size),
        Family::Tiny => build_tiny(width, num_classes, input_size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shufflenet_topology() {
        let net = build_shufflenet_v2(1.1, 100, (32, 32)).unwrap();
        assert_eq!(net.eligible_blocks().len(), 13);
        assert_eq!(net.blocks.iter().filter(|b| b.stride == 2).count(), 3);
        assert_eq!(net.mid_blocks().len(), 7);
        let outs: Vec<usize> = net
            .blocks
            .iter()
            .filter(|b| b.stride == 2)
            .map(|b| b.out_channels)
            .collect();
        assert_eq!(outs, [128, 256, 512]);
        assert_eq!(net.validate().unwrap().channels, 100);
    }

    #[test]
    fn mobilenet_topology() {
        let net = build_mobilenet_v1(1.0, 100, (32, 32)).unwrap();
        assert_eq!(net.blocks.len(), 13);
        assert_eq!(net.blocks.last().unwrap().out_channels, 1024);
        assert_eq!(net.mid_blocks(), (3..=9).collect::<Vec<_>>());
        net.validate().unwrap();
        assert_eq!(build_mobilenet_v1(0.5, 10, (32, 32)).unwrap().stem_channels, 16);
    }

    #[test]
    fn unsupported_widths() {
        assert!(build_shufflenet_v2(0.75, 100, (32, 32)).is_err());
        assert!(build_mobilenet_v1(1.1, 100, (32, 32)).is_err());
        assert!(build_tiny(0.05, 8, (8, 8)).is_err());
        assert!(build_mobilenet_v1(1.0, 0, (32, 32)).is_err());
    }

    #[test]
    fn all_widths_validate() {
        for w in [0.5, 1.0, 1.1, 1.5] {
            build_shufflenet_v2(w, 10, (32, 32)).unwrap().validate().unwrap();
        }
        for w in [0.5, 1.0, 2.0] {
            build_mobilenet_v1(w, 10, (32, 32)).unwrap().validate().unwrap();
        }
        build_tiny(1.0, 8, (12, 12)).unwrap().validate().unwrap();
    }
}
