//! Declarative layer descriptions and shape inference.

use std::fmt;

use super::param::DEFAULT_GROUP;
use crate::error::{shape_err, Result};
use crate::transforms::TransformSpec;

/// `(channels, height, width)` of one batch item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn spatial(&self) -> usize {
        self.height * self.width
    }

    pub fn numel(&self) -> usize {
        self.channels * self.spatial()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Output side of a 3×3, padding-1 convolution: `ceil(len / stride)`.
pub fn conv3x3_out(len: usize, stride: usize) -> usize {
    (len - 1) / stride + 1
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Dense 3×3 convolution (network stems).
    Conv3x3 {
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    DepthwiseConv3x3 {
        channels: usize,
        stride: usize,
    },
    /// Learnable 1×1 convolution, or a random-constant one when `frozen`.
    PointwiseConv {
        in_channels: usize,
        out_channels: usize,
        frozen: bool,
    },
    TransformPC(TransformSpec),
    BatchNorm {
        channels: usize,
    },
    ReLU,
    ChannelShuffle {
        groups: usize,
    },
    ChannelSplit,
    Concat,
    GlobalAvgPool,
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv3x3 { .. } => "Conv3x3",
            LayerSpec::DepthwiseConv3x3 { .. } => "DepthwiseConv3x3",
            LayerSpec::PointwiseConv { frozen: false, .. } => "PointwiseConv",
            LayerSpec::PointwiseConv { frozen: true, .. } => "RandomConstantPC",
            LayerSpec::TransformPC(_) => "TransformPC",
            LayerSpec::BatchNorm { .. } => "BatchNorm",
            LayerSpec::ReLU => "ReLU",
            LayerSpec::ChannelShuffle { .. } => "ChannelShuffle",
            LayerSpec::ChannelSplit => "ChannelSplit",
            LayerSpec::Concat => "Concat",
            LayerSpec::GlobalAvgPool => "GlobalAvgPool",
            LayerSpec::FullyConnected { .. } => "FullyConnected",
        }
    }

    /// Learnable parameter count.
    pub fn learnable_params(&self) -> u64 {
        match *self {
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
                ..
            } => (9 * in_channels * out_channels) as u64,
            LayerSpec::DepthwiseConv3x3 { channels, .. } => 9 * channels as u64,
            LayerSpec::PointwiseConv {
                in_channels,
                out_channels,
                frozen: false,
            } => (in_channels * out_channels) as u64,
            LayerSpec::BatchNorm { channels } => 2 * channels as u64,
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => (in_features * out_features + out_features) as u64,
            _ => 0,
        }
    }

    /// Stored but non-learnable weights (random-constant PC).
    pub fn fixed_weights(&self) -> u64 {
        match *self {
            LayerSpec::PointwiseConv {
                in_channels,
                out_channels,
                frozen: true,
            } => (in_channels * out_channels) as u64,
            _ => 0,
        }
    }

    /// Shape after this layer, checking channel arithmetic.
    pub fn out_shape(&self, s: Shape) -> Result<Shape> {
        let expect = |want: usize| -> Result<()> {
            if s.channels != want {
                shape_err(format!(
                    "{} expects {want} channels, got {}",
                    self.kind_name(),
                    s.channels
                ))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
                stride,
            } => {
                expect(in_channels)?;
                check_stride(stride)?;
                Ok(Shape::new(
                    out_channels,
                    conv3x3_out(s.height, stride),
                    conv3x3_out(s.width, stride),
                ))
            }
            LayerSpec::DepthwiseConv3x3 { channels, stride } => {
                expect(channels)?;
                check_stride(stride)?;
                Ok(Shape::new(
                    channels,
                    conv3x3_out(s.height, stride),
                    conv3x3_out(s.width, stride),
                ))
            }
            LayerSpec::PointwiseConv {
                in_channels,
                out_channels,
                ..
            } => {
                expect(in_channels)?;
                Ok(Shape::new(out_channels, s.height, s.width))
            }
            LayerSpec::TransformPC(t) => {
                expect(t.in_channels)?;
                t.validate()?;
                Ok(Shape::new(t.out_channels, s.height, s.width))
            }
            LayerSpec::BatchNorm { channels } => {
                expect(channels)?;
                Ok(s)
            }
            LayerSpec::ReLU | LayerSpec::Concat => Ok(s),
            LayerSpec::ChannelShuffle { groups } => {
                if groups == 0 || !s.channels.is_multiple_of(groups) {
                    return shape_err(format!("cannot shuffle {} channels into {groups} groups", s.channels));
                }
                Ok(s)
            }
            LayerSpec::ChannelSplit => {
                if !s.channels.is_multiple_of(2) {
                    return shape_err(format!("cannot split {} channels in half", s.channels));
                }
                Ok(Shape::new(s.channels / 2, s.height, s.width))
            }
            LayerSpec::GlobalAvgPool => Ok(Shape::new(s.channels, 1, 1)),
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => {
                if s.numel() != in_features {
                    return shape_err(format!(
                        "FullyConnected expects {in_features} features, got {}",
                        s.numel()
                    ));
                }
                Ok(Shape::new(out_features, 1, 1))
            }
        }
    }
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 1 || stride == 2 {
        Ok(())
    } else {
        shape_err(format!("stride must be 1 or 2, got {stride}"))
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
                stride,
            } => write!(f, "Conv3x3 {in_channels}->{out_channels} stride={stride}"),
            LayerSpec::DepthwiseConv3x3 { channels, stride } => {
                write!(f, "DepthwiseConv3x3 {channels} stride={stride}")
            }
            LayerSpec::PointwiseConv {
                in_channels,
                out_channels,
                frozen,
            } => write!(
                f,
                "{} {in_channels}->{out_channels}",
                if *frozen { "RandomConstantPC" } else { "PointwiseConv" }
            ),
            LayerSpec::TransformPC(t) => write!(
                f,
                "TransformPC {} {}->{} {}{}",
                t.kind,
                t.in_channels,
                t.out_channels,
                if t.fast { "fast" } else { "naive" },
                if t.pad_to_pow2 { " pad-pow2" } else { "" }
            ),
            LayerSpec::BatchNorm { channels } => write!(f, "BatchNorm {channels}"),
            LayerSpec::ReLU => write!(f, "ReLU"),
            LayerSpec::ChannelShuffle { groups } => write!(f, "ChannelShuffle groups={groups}"),
            LayerSpec::ChannelSplit => write!(f, "ChannelSplit"),
            LayerSpec::Concat => write!(f, "Concat"),
            LayerSpec::GlobalAvgPool => write!(f, "GlobalAvgPool"),
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => write!(f, "FullyConnected {in_features}->{out_features}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedLayer {
    pub name: String,
    pub spec: LayerSpec,
    /// Weight-decay group assigned to this layer's weights.
    pub group: String,
}

impl NamedLayer {
    pub fn new(name: impl Into<String>, spec: LayerSpec) -> Self {
        Self {
            name: name.into(),
            spec,
            group: DEFAULT_GROUP.to_string(),
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = group.into();
        self
    }
}

/// One element of a network's layer tree.
#[derive(Clone, Debug, PartialEq)]
pub enum SpecNode {
    Layer(NamedLayer),
    /// Two parallel paths whose outputs are concatenated along channels and
    /// then shuffled. With `split`, each path sees half of the input
    /// channels; otherwise both see all of it. An empty path is the identity.
    Branch {
        name: String,
        split: bool,
        left: Vec<NamedLayer>,
        right: Vec<NamedLayer>,
        shuffle_groups: usize,
    },
}

/// A layer together with the shapes it sees.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapedLayer<'a> {
    pub layer: &'a NamedLayer,
    pub input: Shape,
    pub output: Shape,
}

fn walk_chain<'a>(layers: &'a [NamedLayer], mut s: Shape, out: &mut Vec<ShapedLayer<'a>>) -> Result<Shape> {
    for l in layers {
        let o = l.spec.out_shape(s).map_err(|e| prefix(&l.name, e))?;
        out.push(ShapedLayer {
            layer: l,
            input: s,
            output: o,
        });
        s = o;
    }
    Ok(s)
}

fn prefix(name: &str, e: crate::Error) -> crate::Error {
    match e {
        crate::Error::Shape(m) => crate::Error::Shape(format!("{name}: {m}")),
        other => other,
    }
}

/// Runs shape inference over a layer tree, returning every leaf layer in
/// execution order with its input and output shape, and the final shape.
pub fn infer_shapes(nodes: &[SpecNode], input: Shape) -> Result<(Vec<ShapedLayer<'_>>, Shape)> {
    let mut out = Vec::new();
    let mut s = input;
    for node in nodes {
        match node {
            SpecNode::Layer(l) => {
                s = walk_chain(std::slice::from_ref(l), s, &mut out)?;
            }
            SpecNode::Branch {
                name,
                split,
                left,
                right,
                shuffle_groups,
            } => {
                let branch_in = if *split {
                    LayerSpec::ChannelSplit.out_shape(s).map_err(|e| prefix(name, e))?
                } else {
                    s
                };
                let l = walk_chain(left, branch_in, &mut out)?;
                let r = walk_chain(right, branch_in, &mut out)?;
                if (l.height, l.width) != (r.height, r.width) {
                    return shape_err(format!("{name}: branch spatial dims differ ({l} vs {r})"));
                }
                s = Shape::new(l.channels + r.channels, l.height, l.width);
                LayerSpec::ChannelShuffle {
                    groups: *shuffle_groups,
                }
                .out_shape(s)
                .map_err(|e| prefix(name, e))?;
            }
        }
    }
    Ok((out, s))
}

/// Flat, human-readable listing of a layer tree, including the implicit
/// split / concat / shuffle steps of branches.
pub fn expanded_listing(nodes: &[SpecNode], input: Shape) -> Result<Vec<(String, String, Shape)>> {
    let (shaped, _) = infer_shapes(nodes, input)?;
    let mut shapes = shaped.iter().map(|s| (s.layer.name.as_str(), s.output));
    let mut rows = Vec::new();
    let mut current = input;
    for node in nodes {
        match node {
            SpecNode::Layer(l) => {
                let (_, o) = shapes.next().expect("shape per layer");
                rows.push((l.name.clone(), l.spec.to_string(), o));
                current = o;
            }
            SpecNode::Branch {
                name,
                split,
                left,
                right,
                shuffle_groups,
            } => {
                let branch_in = if *split {
                    rows.push((
                        format!("{name}.split"),
                        LayerSpec::ChannelSplit.to_string(),
                        LayerSpec::ChannelSplit.out_shape(current)?,
                    ));
                    LayerSpec::ChannelSplit.out_shape(current)?
                } else {
                    current
                };
                let mut lo = branch_in;
                if left.is_empty() {
                    rows.push((format!("{name}.left"), "Identity".to_string(), branch_in));
                }
                for l in left {
                    let (_, o) = shapes.next().expect("shape per layer");
                    rows.push((l.name.clone(), l.spec.to_string(), o));
                    lo = o;
                }
                let mut ro = branch_in;
                for l in right {
                    let (_, o) = shapes.next().expect("shape per layer");
                    rows.push((l.name.clone(), l.spec.to_string(), o));
                    ro = o;
                }
                current = Shape::new(lo.channels + ro.channels, lo.height, lo.width);
                rows.push((format!("{name}.concat"), LayerSpec::Concat.to_string(), current));
                rows.push((
                    format!("{name}.shuffle"),
                    LayerSpec::ChannelShuffle {
                        groups: *shuffle_groups,
                    }
                    .to_string(),
                    current,
                ));
            }
        }
    }
    Ok(rows)
}
