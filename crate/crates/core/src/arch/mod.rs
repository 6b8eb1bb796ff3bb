//! Declarative network descriptions: ShuffleNet-V2 and MobileNet-V1
//! builders, pointwise block variants and hierarchy substitution schemes.
//!
//! A [`NetworkSpec`] is a block-level description. [`NetworkSpec::to_nodes`]
//! expands it into the layer tree that [`crate::nn::Network`] executes and
//! [`crate::cost`] counts.

mod builders;
mod description;
mod scheme;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use builders::{
    build, build_mobilenet_v1, build_shufflenet_v2, build_tiny, MOBILENET_V1_BLOCKS, SHUFFLENET_V2_REPEATS,
};
pub use description::{InputSize, NetDescription};
pub use scheme::{apply_substitution, parse_scheme_name, Level, SubstitutionScheme};

pub use crate::nn::rcpc_init;

use crate::error::{Error, Result};
use crate::nn::spec::{infer_shapes, LayerSpec, NamedLayer, Shape, SpecNode};
use crate::nn::{Network, DEFAULT_GROUP};
use crate::transforms::{TransformKind, TransformSpec};

/// Weight-decay group of the depthwise weights in the last three blocks.
pub const LAST3_DW_GROUP: &str = "last3_dw";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "shufflenet_v2", alias = "shufflenet")]
    ShuffleNetV2,
    #[serde(rename = "mobilenet_v1", alias = "mobilenet")]
    MobileNetV1,
    /// Two separable blocks on a small stem; meant for desk-scale runs.
    Tiny,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ShuffleNetV2 => "shufflenet_v2",
            Family::MobileNetV1 => "mobilenet_v1",
            Family::Tiny => "tiny",
        })
    }
}

/// Which pointwise layer a block uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    /// (a) learnable pointwise convolution.
    Baseline,
    /// (b) frozen random-constant pointwise convolution.
    Rcpc,
    /// (c) transform pointwise convolution followed by batch norm and ReLU.
    CtpcRelu,
    /// (d) transform pointwise convolution followed by batch norm only.
    Ctpc,
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantTag::Baseline => "baseline",
            VariantTag::Rcpc => "rcpc",
            VariantTag::CtpcRelu => "ctpc_relu",
            VariantTag::Ctpc => "ctpc",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "shufflenet_v2" | "shufflenet" => Ok(Family::ShuffleNetV2),
            "mobilenet_v1" | "mobilenet" => Ok(Family::MobileNetV1),
            "tiny" => Ok(Family::Tiny),
            other => Err(Error::Config(format!("unknown network family '{other}'"))),
        }
    }
}

impl std::str::FromStr for VariantTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline" | "a" => Ok(VariantTag::Baseline),
            "rcpc" | "b" => Ok(VariantTag::Rcpc),
            "ctpc_relu" | "c" => Ok(VariantTag::CtpcRelu),
            "ctpc" | "d" => Ok(VariantTag::Ctpc),
            other => Err(Error::Config(format!("unknown block variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockVariant {
    tag: VariantTag,
    transform: Option<TransformKind>,
}

impl BlockVariant {
    /// A transform is required for the CTPC variants and forbidden otherwise.
    pub fn new(tag: VariantTag, transform: Option<TransformKind>) -> Result<Self> {
        let needs = matches!(tag, VariantTag::CtpcRelu | VariantTag::Ctpc);
        if needs != transform.is_some() {
            return Err(Error::Config(if needs {
                format!("variant {tag} needs a transform (dwht or dct)")
            } else {
                format!("variant {tag} takes no transform")
            }));
        }
        Ok(Self { tag, transform })
    }

    pub const fn baseline() -> Self {
        Self {
            tag: VariantTag::Baseline,
            transform: None,
        }
    }

    pub const fn rcpc() -> Self {
        Self {
            tag: VariantTag::Rcpc,
            transform: None,
        }
    }

    pub const fn ctpc_relu(kind: TransformKind) -> Self {
        Self {
            tag: VariantTag::CtpcRelu,
            transform: Some(kind),
        }
    }

    pub const fn ctpc(kind: TransformKind) -> Self {
        Self {
            tag: VariantTag::Ctpc,
            transform: Some(kind),
        }
    }

    pub fn tag(&self) -> VariantTag {
        self.tag
    }

    pub fn transform(&self) -> Option<TransformKind> {
        self.transform
    }

    /// Pointwise layer for `in_channels → out_channels`.
    fn pointwise(&self, in_channels: usize, out_channels: usize) -> Result<LayerSpec> {
        Ok(match (self.tag, self.transform) {
            (VariantTag::Baseline, _) => LayerSpec::PointwiseConv {
                in_channels,
                out_channels,
                frozen: false,
            },
            (VariantTag::Rcpc, _) => LayerSpec::PointwiseConv {
                in_channels,
                out_channels,
                frozen: true,
            },
            (_, Some(kind)) => LayerSpec::TransformPC(TransformSpec::new(kind, in_channels, out_channels)?),
            (_, None) => unreachable!("validated in BlockVariant::new"),
        })
    }

    /// Whether a ReLU follows the pointwise layer's batch norm.
    fn relu_after_pointwise(&self) -> bool {
        self.tag != VariantTag::Ctpc
    }

    /// Whether a ReLU sits between the depthwise conv and the pointwise
    /// layer of a separable block.
    fn relu_after_depthwise(&self) -> bool {
        matches!(self.tag, VariantTag::Baseline | VariantTag::Rcpc)
    }
}

impl fmt::Display for BlockVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.transform {
            Some(k) => write!(f, "{}({k})", self.tag),
            None => write!(f, "{}", self.tag),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// MobileNet-V1 depthwise separable block.
    Separable,
    /// ShuffleNet-V2 unit. Stride 1 splits channels in half and transforms
    /// one half; stride 2 processes the full input on both paths.
    ShuffleUnit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub kind: BlockKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub variant: BlockVariant,
    /// 1-based stage index (ShuffleNet) or 0 when the family has no stages.
    pub stage: usize,
    /// Member of the middle hierarchy level.
    pub mid: bool,
}

impl BlockSpec {
    /// Whether substitution schemes may replace this block.
    pub fn eligible(&self) -> bool {
        match self.kind {
            BlockKind::Separable => true,
            BlockKind::ShuffleUnit => self.stride == 1,
        }
    }

    /// Layer tree for this block. Separable blocks are flat layer lists;
    /// ShuffleNet units are single split/merge branches.
    fn expand(&self, dw_group: &str) -> Result<Vec<SpecNode>> {
        let n = &self.name;
        let v = &self.variant;
        let layer = |suffix: &str, spec: LayerSpec| NamedLayer::new(format!("{n}.{suffix}"), spec);
        let dw = |suffix: &str, channels: usize| {
            layer(
                suffix,
                LayerSpec::DepthwiseConv3x3 {
                    channels,
                    stride: self.stride,
                },
            )
            .with_group(dw_group)
        };
        let bn = |suffix: &str, channels: usize| layer(suffix, LayerSpec::BatchNorm { channels });
        let relu = |suffix: &str| layer(suffix, LayerSpec::ReLU);
        match self.kind {
            BlockKind::Separable => {
                let mut out = vec![dw("dw", self.in_channels), bn("bn1", self.in_channels)];
                if v.relu_after_depthwise() {
                    out.push(relu("relu1"));
                }
                out.push(layer("pw", v.pointwise(self.in_channels, self.out_channels)?));
                out.push(bn("bn2", self.out_channels));
                if v.relu_after_pointwise() {
                    out.push(relu("relu2"));
                }
                Ok(out.into_iter().map(SpecNode::Layer).collect())
            }
            BlockKind::ShuffleUnit if self.stride == 1 => {
                let c = self.in_channels / 2;
                let mut right = vec![layer("pw1", v.pointwise(c, c)?), bn("bn1", c)];
                if v.relu_after_pointwise() {
                    right.push(relu("relu1"));
                }
                right.push(dw("dw", c));
                right.push(bn("bn2", c));
                right.push(layer("pw2", v.pointwise(c, c)?));
                right.push(bn("bn3", c));
                if v.relu_after_pointwise() {
                    right.push(relu("relu2"));
                }
                Ok(vec![SpecNode::Branch {
                    name: n.clone(),
                    split: true,
                    left: Vec::new(),
                    right,
                    shuffle_groups: 2,
                }])
            }
            BlockKind::ShuffleUnit => {
                let (cin, b) = (self.in_channels, self.out_channels / 2);
                let left = vec![
                    dw("left.dw", cin),
                    bn("left.bn1", cin),
                    layer("left.pw", v.pointwise(cin, b)?),
                    bn("left.bn2", b),
                    relu("left.relu"),
                ];
                let right = vec![
                    layer("right.pw1", v.pointwise(cin, b)?),
                    bn("right.bn1", b),
                    relu("right.relu1"),
                    dw("right.dw", b),
                    bn("right.bn2", b),
                    layer("right.pw2", v.pointwise(b, b)?),
                    bn("right.bn3", b),
                    relu("right.relu2"),
                ];
                Ok(vec![SpecNode::Branch {
                    name: n.clone(),
                    split: false,
                    left,
                    right,
                    shuffle_groups: 2,
                }])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub family: Family,
    pub width: f64,
    pub num_classes: usize,
    pub input_size: (usize, usize),
    pub stem_channels: usize,
    pub blocks: Vec<BlockSpec>,
    /// Channels of the 1×1 conv before pooling (ShuffleNet only).
    pub final_channels: Option<usize>,
}

impl NetworkSpec {
    pub fn input_shape(&self) -> Shape {
        Shape::new(3, self.input_size.0, self.input_size.1)
    }

    pub fn with_num_classes(mut self, num_classes: usize) -> Self {
        self.num_classes = num_classes;
        self
    }

    pub fn with_input_size(mut self, h: usize, w: usize) -> Self {
        self.input_size = (h, w);
        self
    }

    /// Indices of blocks substitution may touch, in network order.
    pub fn eligible_blocks(&self) -> Vec<usize> {
        (0..self.blocks.len()).filter(|&i| self.blocks[i].eligible()).collect()
    }

    /// Indices of middle-level blocks, in network order.
    pub fn mid_blocks(&self) -> Vec<usize> {
        (0..self.blocks.len())
            .filter(|&i| self.blocks[i].eligible() && self.blocks[i].mid)
            .collect()
    }

    fn head_channels(&self) -> usize {
        self.final_channels
            .or_else(|| self.blocks.last().map(|b| b.out_channels))
            .unwrap_or(self.stem_channels)
    }

    /// Expands into the executable layer tree.
    pub fn to_nodes(&self) -> Result<Vec<SpecNode>> {
        let stem = |suffix: &str, spec| SpecNode::Layer(NamedLayer::new(format!("stem.{suffix}"), spec));
        let mut nodes = vec![
            stem(
                "conv",
                LayerSpec::Conv3x3 {
                    in_channels: 3,
                    out_channels: self.stem_channels,
                    stride: 1,
                },
            ),
            stem(
                "bn",
                LayerSpec::BatchNorm {
                    channels: self.stem_channels,
                },
            ),
            stem("relu", LayerSpec::ReLU),
        ];
        let last3 = self.blocks.len().saturating_sub(3);
        for (i, b) in self.blocks.iter().enumerate() {
            let group = if i >= last3 { LAST3_DW_GROUP } else { DEFAULT_GROUP };
            nodes.extend(b.expand(group)?);
        }
        let head = |name: &str, spec| SpecNode::Layer(NamedLayer::new(name, spec));
        if let Some(fc) = self.final_channels {
            let cin = self.blocks.last().map_or(self.stem_channels, |b| b.out_channels);
            nodes.push(head(
                "final.conv",
                LayerSpec::PointwiseConv {
                    in_channels: cin,
                    out_channels: fc,
                    frozen: false,
                },
            ));
            nodes.push(head("final.bn", LayerSpec::BatchNorm { channels: fc }));
            nodes.push(head("final.relu", LayerSpec::ReLU));
        }
        nodes.push(head("pool", LayerSpec::GlobalAvgPool));
        nodes.push(head(
            "fc",
            LayerSpec::FullyConnected {
                in_features: self.head_channels(),
                out_features: self.num_classes,
            },
        ));
        Ok(nodes)
    }

    /// Checks channel arithmetic end to end at the declared input size.
    pub fn validate(&self) -> Result<Shape> {
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        if self.input_size.0 == 0 || self.input_size.1 == 0 {
            return Err(Error::Config("input size must be positive".into()));
        }
        let nodes = self.to_nodes()?;
        Ok(infer_shapes(&nodes, self.input_shape())?.1)
    }

    pub fn instantiate(&self, seed: u64) -> Result<Network> {
        Network::new(&self.to_nodes()?, self.input_shape(), seed)
    }

    /// Number of blocks using each variant, for summaries.
    pub fn variant_summary(&self) -> String {
        let mut counts: Vec<(BlockVariant, usize)> = Vec::new();
        for b in &self.blocks {
            match counts.iter_mut().find(|(v, _)| *v == b.variant) {
                Some((_, c)) => *c += 1,
                None => counts.push((b.variant, 1)),
            }
        }
        counts
            .iter()
            .map(|(v, c)| format!("{c}x {v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}x, {} classes, {}x{} input, {} blocks ({})",
            self.family,
            self.width,
            self.num_classes,
            self.input_size.0,
            self.input_size.1,
            self.blocks.len(),
            self.variant_summary()
        )
    }
}
