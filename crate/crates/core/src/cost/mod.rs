//! Static parameter and FLOP accounting.
//!
//! FLOPs are multiplications + additions + subtractions performed by one
//! inference pass of a single input. Per layer:
//!
//! | layer | multiplications | additions / subtractions |
//! |---|---|---|
//! | 3×3 conv (K = 9·C_in taps) | K per output element | K − 1 adds per output element |
//! | 3×3 depthwise | 9 per output element | 8 adds per output element |
//! | learnable or random-constant PC | N·M per location | (N − 1)·M adds per location |
//! | transform PC | [`TransformSpec::op_count`] per location | same |
//! | batch norm | 1 per element | 1 add per element |
//! | ReLU | 0 | 1 add (comparison) per element |
//! | global average pool | 1 per channel | HW − 1 adds per channel |
//! | fully connected | in·out | in·out adds (dot products + bias) |
//!
//! Channel split, concat and shuffle are free.
//!
//! [`TransformSpec::op_count`]: crate::transforms::TransformSpec::op_count

mod targets;

use std::fmt;
use std::io::Write;

pub use targets::{
    compare_to_targets, comparison_header, Comparison, ParamBasis, ReductionTarget, Target, TargetFile, Verdict,
    BUNDLED_TARGETS,
};

use crate::arch::NetworkSpec;
use crate::error::Result;
use crate::nn::spec::{infer_shapes, LayerSpec, Shape, SpecNode};
use crate::transforms::{op_count, OpCount, PcEvaluation};

/// Operation count of one layer for one input item.
pub fn layer_ops(spec: &LayerSpec, input: Shape, output: Shape) -> Result<OpCount> {
    let out_elems = output.numel() as u64;
    Ok(match *spec {
        LayerSpec::Conv3x3 { in_channels, .. } => {
            let k = 9 * in_channels as u64;
            OpCount::new(k * out_elems, (k - 1) * out_elems, 0)
        }
        LayerSpec::DepthwiseConv3x3 { .. } => OpCount::new(9 * out_elems, 8 * out_elems, 0),
        LayerSpec::PointwiseConv {
            in_channels,
            out_channels,
            ..
        } => op_count(PcEvaluation::NaivePC, in_channels, out_channels)?.scaled(input.spatial() as u64),
        LayerSpec::TransformPC(t) => t.op_count()?.scaled(input.spatial() as u64),
        LayerSpec::BatchNorm { .. } => OpCount::new(out_elems, out_elems, 0),
        LayerSpec::ReLU => OpCount::new(0, out_elems, 0),
        LayerSpec::GlobalAvgPool => {
            let c = input.channels as u64;
            OpCount::new(c, c * (input.spatial() as u64 - 1), 0)
        }
        LayerSpec::FullyConnected {
            in_features,
            out_features,
        } => {
            let n = (in_features * out_features) as u64;
            OpCount::new(n, n, 0)
        }
        LayerSpec::ChannelShuffle { .. } | LayerSpec::ChannelSplit | LayerSpec::Concat => OpCount::ZERO,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCost {
    pub name: String,
    pub kind: &'static str,
    pub output: Shape,
    /// Learnable parameters.
    pub params: u64,
    /// Stored non-learnable weights (random-constant PC).
    pub fixed: u64,
    pub ops: OpCount,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Totals {
    pub params: u64,
    pub fixed: u64,
    pub multiplications: u64,
    pub additions: u64,
    pub subtractions: u64,
    pub flops: u64,
}

impl Totals {
    /// Learnable plus fixed weights.
    pub fn stored(&self) -> u64 {
        self.params + self.fixed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub label: String,
    pub input_size: (usize, usize),
    pub per_layer: Vec<LayerCost>,
    pub totals: Totals,
}

impl CostReport {
    pub fn from_layers(label: impl Into<String>, input_size: (usize, usize), per_layer: Vec<LayerCost>) -> Self {
        let mut t = Totals::default();
        for l in &per_layer {
            t.params += l.params;
            t.fixed += l.fixed;
            t.multiplications += l.ops.multiplications;
            t.additions += l.ops.additions;
            t.subtractions += l.ops.subtractions;
        }
        t.flops = t.multiplications + t.additions + t.subtractions;
        Self {
            label: label.into(),
            input_size,
            per_layer,
            totals: t,
        }
    }

    /// CSV with columns `layer,params,mult,add,sub,flops`, one row per layer
    /// and a final `total` row.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| crate::Error::Io(e.into());
        out.write_record(["layer", "params", "mult", "add", "sub", "flops"])
            .map_err(io)?;
        let rows = self
            .per_layer
            .iter()
            .map(|l| (l.name.as_str(), l.params, l.ops))
            .chain(std::iter::once((
                "total",
                self.totals.params,
                OpCount::new(
                    self.totals.multiplications,
                    self.totals.additions,
                    self.totals.subtractions,
                ),
            )));
        for (name, params, ops) in rows {
            out.write_record([
                name.to_string(),
                params.to_string(),
                ops.multiplications.to_string(),
                ops.additions.to_string(),
                ops.subtractions.to_string(),
                ops.total().to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} @ {}x{}", self.label, self.input_size.0, self.input_size.1)?;
        writeln!(
            f,
            "{:<22} {:<18} {:>12} {:>10} {:>12} {:>12} {:>10} {:>12}",
            "layer", "kind", "output", "params", "mult", "add", "sub", "flops"
        )?;
        for l in &self.per_layer {
            writeln!(
                f,
                "{:<22} {:<18} {:>12} {:>10} {:>12} {:>12} {:>10} {:>12}",
                l.name,
                l.kind,
                l.output.to_string(),
                l.params,
                l.ops.multiplications,
                l.ops.additions,
                l.ops.subtractions,
                l.ops.total()
            )?;
        }
        let t = &self.totals;
        writeln!(
            f,
            "{:<22} {:<18} {:>12} {:>10} {:>12} {:>12} {:>10} {:>12}",
            "total", "", "", t.params, t.multiplications, t.additions, t.subtractions, t.flops
        )?;
        write!(
            f,
            "learnable params {:.4}M, fixed weights {:.4}M, FLOPs {:.2}M",
            t.params as f64 / 1e6,
            t.fixed as f64 / 1e6,
            t.flops as f64 / 1e6
        )
    }
}

/// Costs every leaf layer of a layer tree at the given input shape.
pub fn cost_nodes(label: impl Into<String>, nodes: &[SpecNode], input: Shape) -> Result<CostReport> {
    let (shaped, _) = infer_shapes(nodes, input)?;
    let per_layer = shaped
        .iter()
        .map(|s| {
            Ok(LayerCost {
                name: s.layer.name.clone(),
                kind: s.layer.spec.kind_name(),
                output: s.output,
                params: s.layer.spec.learnable_params(),
                fixed: s.layer.spec.fixed_weights(),
                ops: layer_ops(&s.layer.spec, s.input, s.output)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport::from_layers(label, (input.height, input.width), per_layer))
}

/// Full cost report at `input_size` (FLOPs depend on it; parameters do not).
pub fn count_flops(net: &NetworkSpec, input_size: (usize, usize)) -> Result<CostReport> {
    let net = net.clone().with_input_size(input_size.0, input_size.1);
    cost_nodes(net.to_string(), &net.to_nodes()?, net.input_shape())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCount {
    /// `(layer, learnable, fixed)` for every layer.
    pub per_layer: Vec<(String, u64, u64)>,
    pub learnable: u64,
    pub fixed: u64,
}

/// Learnable parameters per layer. Transform PC layers contribute nothing;
/// random-constant PC weights are reported as `fixed`.
pub fn count_params(net: &NetworkSpec) -> Result<ParamCount> {
    let report = count_flops(net, net.input_size)?;
    Ok(ParamCount {
        per_layer: report
            .per_layer
            .iter()
            .map(|l| (l.name.clone(), l.params, l.fixed))
            .collect(),
        learnable: report.totals.params,
        fixed: report.totals.fixed,
    })
}
