//! Executable networks instantiated from a [`SpecNode`] tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::init::{fan_in_bound, rcpc_init};
use super::layers::{
    channel_shuffle, channel_split_at, channel_unshuffle, concat, BatchNorm, ChannelShuffle, Conv3x3, DepthwiseConv3x3,
    FullyConnected, GlobalAvgPool, Layer, Mode, PointwiseConv, Relu, TransformPC,
};
use super::param::{Buffer, ParamTensor};
use super::spec::{infer_shapes, LayerSpec, NamedLayer, Shape, SpecNode};
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

enum Node {
    Layer(Box<dyn Layer>),
    Branch {
        name: String,
        split: bool,
        left: Vec<Box<dyn Layer>>,
        right: Vec<Box<dyn Layer>>,
        shuffle_groups: usize,
        /// Channels produced by the left path in the last forward call.
        left_channels: usize,
    },
}

/// A trainable network.
///
/// Parameters are initialized from a seeded ChaCha8 stream in layer order:
/// learnable convolutions and FC weights draw `U(±1/√fan_in)`, random-constant
/// pointwise layers draw their own seed from the same stream.
pub struct Network {
    nodes: Vec<Node>,
    input: Shape,
    output: Shape,
    /// `(layer name, layer kind)` in execution order.
    kinds: Vec<(String, &'static str)>,
}

fn instantiate(l: &NamedLayer, rng: &mut ChaCha8Rng) -> Result<Box<dyn Layer>> {
    let name = l.name.clone();
    let weight = format!("{name}.weight");
    Ok(match l.spec {
        LayerSpec::Conv3x3 {
            in_channels,
            out_channels,
            stride,
        } => {
            let w = ParamTensor::uniform(
                weight,
                vec![out_channels, in_channels, 3, 3],
                fan_in_bound(9 * in_channels),
                rng,
                true,
            )
            .with_group(&l.group);
            Box::new(Conv3x3::new(name, in_channels, out_channels, stride, w))
        }
        LayerSpec::DepthwiseConv3x3 { channels, stride } => {
            let w =
                ParamTensor::uniform(weight, vec![channels, 1, 3, 3], fan_in_bound(9), rng, true).with_group(&l.group);
            Box::new(DepthwiseConv3x3::new(name, stride, w))
        }
        LayerSpec::PointwiseConv {
            in_channels,
            out_channels,
            frozen,
        } => {
            let w = if frozen {
                let mut w = rcpc_init(in_channels, out_channels, rng.gen())?;
                w.name = weight;
                w
            } else {
                ParamTensor::uniform(
                    weight,
                    vec![out_channels, in_channels],
                    fan_in_bound(in_channels),
                    rng,
                    true,
                )
            };
            Box::new(PointwiseConv::new(name, w.with_group(&l.group)))
        }
        LayerSpec::TransformPC(spec) => Box::new(TransformPC::new(name, spec)?),
        LayerSpec::BatchNorm { channels } => Box::new(BatchNorm::new(name, channels).with_group(&l.group)),
        LayerSpec::ReLU => Box::new(Relu::new(name)),
        LayerSpec::ChannelShuffle { groups } => Box::new(ChannelShuffle::new(name, groups)),
        LayerSpec::GlobalAvgPool => Box::new(GlobalAvgPool::new(name)),
        LayerSpec::FullyConnected {
            in_features,
            out_features,
        } => {
            let bound = fan_in_bound(in_features);
            let w =
                ParamTensor::uniform(weight, vec![out_features, in_features], bound, rng, true).with_group(&l.group);
            let b =
                ParamTensor::uniform(format!("{name}.bias"), vec![out_features], bound, rng, true).with_group(&l.group);
            Box::new(FullyConnected::new(name, w, b))
        }
        LayerSpec::ChannelSplit | LayerSpec::Concat => {
            return Err(Error::Config(format!(
                "{name}: {} is only valid implicitly inside a branch",
                l.spec.kind_name()
            )))
        }
    })
}

fn chain_forward(
    layers: &mut [Box<dyn Layer>],
    x: Tensor4,
    mode: Mode,
    capture: &mut dyn FnMut(&str, &Tensor4),
) -> Result<Tensor4> {
    let mut x = x;
    for l in layers {
        x = l.forward(&x, mode)?;
        capture(l.name(), &x);
    }
    Ok(x)
}

fn chain_backward(layers: &mut [Box<dyn Layer>], grad: Tensor4) -> Result<Tensor4> {
    let mut g = grad;
    for l in layers.iter_mut().rev() {
        g = l.backward(&g)?;
    }
    Ok(g)
}

impl Network {
    pub fn new(nodes: &[SpecNode], input: Shape, seed: u64) -> Result<Self> {
        let (_, output) = infer_shapes(nodes, input)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (shaped, _) = infer_shapes(nodes, input)?;
        let kinds = shaped
            .iter()
            .map(|s| (s.layer.name.clone(), s.layer.spec.kind_name()))
            .collect();
        let mut built = Vec::with_capacity(nodes.len());
        for node in nodes {
            built.push(match node {
                SpecNode::Layer(l) => Node::Layer(instantiate(l, &mut rng)?),
                SpecNode::Branch {
                    name,
                    split,
                    left,
                    right,
                    shuffle_groups,
                } => Node::Branch {
                    name: name.clone(),
                    split: *split,
                    left: left.iter().map(|l| instantiate(l, &mut rng)).collect::<Result<_>>()?,
                    right: right.iter().map(|l| instantiate(l, &mut rng)).collect::<Result<_>>()?,
                    shuffle_groups: *shuffle_groups,
                    left_channels: 0,
                },
            });
        }
        Ok(Self {
            nodes: built,
            input,
            output,
            kinds,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub fn forward(&mut self, x: &Tensor4, mode: Mode) -> Result<Tensor4> {
        self.forward_capture(x, mode, &mut |_, _| {})
    }

    /// Forward pass that hands every leaf layer's output to `capture`
    /// together with the layer name.
    pub fn forward_capture(
        &mut self,
        x: &Tensor4,
        mode: Mode,
        capture: &mut dyn FnMut(&str, &Tensor4),
    ) -> Result<Tensor4> {
        let [_, c, h, w] = x.dims();
        if Shape::new(c, h, w) != self.input {
            return Err(Error::Shape(format!(
                "network expects input {}, got {c}x{h}x{w}",
                self.input
            )));
        }
        let mut x = x.clone();
        for node in &mut self.nodes {
            x = match node {
                Node::Layer(l) => {
                    let y = l.forward(&x, mode)?;
                    capture(l.name(), &y);
                    y
                }
                Node::Branch {
                    split,
                    left,
                    right,
                    shuffle_groups,
                    left_channels,
                    ..
                } => {
                    let (a, b) = if *split {
                        channel_split_at(&x, x.channels() / 2)?
                    } else {
                        (x.clone(), x)
                    };
                    let l = chain_forward(left, a, mode, capture)?;
                    let r = chain_forward(right, b, mode, capture)?;
                    *left_channels = l.channels();
                    channel_shuffle(&concat(&l, &r)?, *shuffle_groups)?
                }
            };
        }
        Ok(x)
    }

    /// Backpropagates `grad` (w.r.t. the last forward output), accumulating
    /// parameter gradients and returning the input gradient.
    pub fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let mut g = grad.clone();
        for node in self.nodes.iter_mut().rev() {
            g = match node {
                Node::Layer(l) => l.backward(&g)?,
                Node::Branch {
                    split,
                    left,
                    right,
                    shuffle_groups,
                    left_channels,
                    ..
                } => {
                    let g = channel_unshuffle(&g, *shuffle_groups)?;
                    let (gl, gr) = channel_split_at(&g, *left_channels)?;
                    let gl = chain_backward(left, gl)?;
                    let gr = chain_backward(right, gr)?;
                    if *split {
                        concat(&gl, &gr)?
                    } else {
                        let mut s = gl;
                        for (a, b) in s.data_mut().iter_mut().zip(gr.data()) {
                            *a += b;
                        }
                        s
                    }
                }
            };
        }
        Ok(g)
    }

    fn layers(&self) -> impl Iterator<Item = &Box<dyn Layer>> {
        self.nodes
            .iter()
            .flat_map(|n| -> Box<dyn Iterator<Item = &Box<dyn Layer>>> {
                match n {
                    Node::Layer(l) => Box::new(std::iter::once(l)),
                    Node::Branch { left, right, .. } => Box::new(left.iter().chain(right.iter())),
                }
            })
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Box<dyn Layer>> {
        self.nodes
            .iter_mut()
            .flat_map(|n| -> Box<dyn Iterator<Item = &mut Box<dyn Layer>>> {
                match n {
                    Node::Layer(l) => Box::new(std::iter::once(l)),
                    Node::Branch { left, right, .. } => Box::new(left.iter_mut().chain(right.iter_mut())),
                }
            })
    }

    /// Leaf layer names in execution order.
    pub fn layer_names(&self) -> Vec<String> {
        self.kinds.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Kind name (as in [`LayerSpec::kind_name`]) of a leaf layer.
    pub fn layer_kind(&self, name: &str) -> Option<&'static str> {
        self.kinds.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    /// Branch names in execution order.
    pub fn branch_names(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Branch { name, .. } => Some(name.as_str()),
                Node::Layer(_) => None,
            })
            .collect()
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn buffers(&self) -> Vec<&Buffer> {
        self.layers().flat_map(|l| l.buffers()).collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Buffer> {
        self.layers_mut().flat_map(|l| l.buffers_mut()).collect()
    }

    pub fn param(&self, name: &str) -> Option<&ParamTensor> {
        self.params().into_iter().find(|p| p.name == name)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn learnable_param_count(&self) -> usize {
        self.params().iter().filter(|p| p.learnable).map(|p| p.len()).sum()
    }

    pub fn fixed_weight_count(&self) -> usize {
        self.params().iter().filter(|p| !p.learnable).map(|p| p.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::TransformSpec;

    fn layer(name: &str, spec: LayerSpec) -> NamedLayer {
        NamedLayer::new(name, spec)
    }

    fn toy() -> Vec<SpecNode> {
        vec![
            SpecNode::Layer(layer(
                "pw",
                LayerSpec::PointwiseConv {
                    in_channels: 2,
                    out_channels: 4,
                    frozen: false,
                },
            )),
            SpecNode::Branch {
                name: "unit".into(),
                split: true,
                left: vec![],
                right: vec![
                    layer("t", LayerSpec::TransformPC(TransformSpec::dwht(2, 2).unwrap())),
                    layer("bn", LayerSpec::BatchNorm { channels: 2 }),
                    layer("dw", LayerSpec::DepthwiseConv3x3 { channels: 2, stride: 1 }),
                ],
                shuffle_groups: 2,
            },
            SpecNode::Layer(layer("gap", LayerSpec::GlobalAvgPool)),
            SpecNode::Layer(layer(
                "fc",
                LayerSpec::FullyConnected {
                    in_features: 4,
                    out_features: 3,
                },
            )),
        ]
    }

    #[test]
    fn build_and_run() {
        let mut net = Network::new(&toy(), Shape::new(2, 4, 4), 1).unwrap();
        assert_eq!(net.learnable_param_count(), 8 + 4 + 18 + 15);
        let x = Tensor4::from_fn([3, 2, 4, 4], |b, c, h, w| ((b + 2 * c + h * w) as f64).sin());
        let y = net.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.dims(), [3, 3, 1, 1]);
        let g = net.backward(&Tensor4::from_fn(y.dims(), |_, _, _, _| 1.0)).unwrap();
        assert_eq!(g.dims(), x.dims());
        assert!(net.layer_names().contains(&"dw".to_string()));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Network::new(&toy(), Shape::new(2, 4, 4), 9).unwrap();
        let b = Network::new(&toy(), Shape::new(2, 4, 4), 9).unwrap();
        let c = Network::new(&toy(), Shape::new(2, 4, 4), 10).unwrap();
        let vals = |n: &Network| n.params().iter().flat_map(|p| p.values.clone()).collect::<Vec<_>>();
        assert_eq!(vals(&a), vals(&b));
        assert_ne!(vals(&a), vals(&c));
    }

    #[test]
    fn rejects_wrong_input() {
        let mut net = Network::new(&toy(), Shape::new(2, 4, 4), 1).unwrap();
        assert!(net.forward(&Tensor4::zeros([1, 3, 4, 4]), Mode::Eval).is_err());
    }
}
