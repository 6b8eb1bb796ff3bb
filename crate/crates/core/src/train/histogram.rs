//! Histogram probes over transform-PC activations and depthwise weights.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{Mode, Network};
use crate::tensor::Tensor4;

pub const HISTOGRAM_BINS: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeSource {
    /// Outputs of transform pointwise layers.
    ActivationAfterTransformPC,
    /// 3×3 depthwise convolution weights.
    DepthwiseWeights,
}

impl fmt::Display for ProbeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeSource::ActivationAfterTransformPC => "transform_activation",
            ProbeSource::DepthwiseWeights => "depthwise_weights",
        })
    }
}

impl FromStr for ProbeSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transform_activation" | "activation" => Ok(Self::ActivationAfterTransformPC),
            "depthwise_weights" | "dw" => Ok(Self::DepthwiseWeights),
            other => Err(Error::Config(format!("unknown probe source '{other}'"))),
        }
    }
}

/// What to histogram and where. `location` is `all`, a layer name, or a
/// block prefix such as `block7` or `s3.u2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Probe {
    pub source: ProbeSource,
    pub location: String,
    /// Drop output channel 0 of transform activations (the all-ones / DC
    /// basis row, which is not sign-balanced).
    pub skip_dc: bool,
}

impl Probe {
    pub fn new(source: ProbeSource, location: impl Into<String>) -> Self {
        Self {
            source,
            location: location.into(),
            skip_dc: false,
        }
    }

    pub fn skipping_dc(mut self) -> Self {
        self.skip_dc = true;
        self
    }

    fn matches(&self, layer: &str) -> bool {
        self.location == "all"
            || layer == self.location
            || layer
                .strip_prefix(self.location.as_str())
                .is_some_and(|r| r.starts_with('.'))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDump {
    pub source: ProbeSource,
    pub location: String,
    /// `bins + 1` strictly increasing edges, symmetric about zero.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl HistogramDump {
    /// Symmetric histogram over `[-r, r]` with `r = max |v|` (`r = 1` when
    /// every value is zero).
    pub fn from_values(source: ProbeSource, location: impl Into<String>, values: &[f64], bins: usize) -> Self {
        let r = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r = if r > 0.0 { r } else { 1.0 };
        let width = 2.0 * r / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| -r + i as f64 * width).collect();
        // exact symmetry, independent of rounding in the running sum
        for i in 0..=bins / 2 {
            edges[bins - i] = -edges[i];
        }
        if bins.is_multiple_of(2) {
            edges[bins / 2] = 0.0;
        }
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = (((v + r) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[i] += 1;
        }
        Self {
            source,
            location: location.into(),
            edges,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with columns `bin_left,bin_right,count`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.into());
        out.write_record(["bin_left", "bin_right", "count"]).map_err(io)?;
        for (i, c) in self.counts.iter().enumerate() {
            out.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])
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

/// Raw values a probe selects. Activations are taken from an eval-mode
/// forward pass over `sample`.
pub fn probe_values(net: &mut Network, probe: &Probe, sample: &Tensor4) -> Result<Vec<f64>> {
    let wanted_kind = match probe.source {
        ProbeSource::ActivationAfterTransformPC => "TransformPC",
        ProbeSource::DepthwiseWeights => "DepthwiseConv3x3",
    };
    let layers: Vec<String> = net
        .layer_names()
        .into_iter()
        .filter(|n| probe.matches(n) && net.layer_kind(n) == Some(wanted_kind))
        .collect();
    if layers.is_empty() {
        return Err(Error::UnknownProbe(format!(
            "no {} at '{}'",
            probe.source, probe.location
        )));
    }
    match probe.source {
        ProbeSource::DepthwiseWeights => Ok(net
            .params()
            .iter()
            .filter(|p| layers.iter().any(|l| p.name == format!("{l}.weight")))
            .flat_map(|p| p.values.iter().copied())
            .collect()),
        ProbeSource::ActivationAfterTransformPC => {
            let mut values = Vec::new();
            let skip = probe.skip_dc;
            net.forward_capture(sample, Mode::Eval, &mut |name, y| {
                if layers.iter().any(|l| l == name) {
                    let first = if skip { 1 } else { 0 };
                    for b in 0..y.batch() {
                        for c in first..y.channels() {
                            values.extend_from_slice(y.plane(b, c));
                        }
                    }
                }
            })?;
            Ok(values)
        }
    }
}

pub fn dump_histogram(net: &mut Network, probe: &Probe, sample: &Tensor4) -> Result<HistogramDump> {
    let values = probe_values(net, probe, sample)?;
    Ok(HistogramDump::from_values(
        probe.source,
        probe.location.clone(),
        &values,
        HISTOGRAM_BINS,
    ))
}

/// `(positive, negative)` fractions of `values`.
pub fn sign_fractions(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let pos = values.iter().filter(|&&v| v > 0.0).count() as f64;
    let neg = values.iter().filter(|&&v| v < 0.0).count() as f64;
    (pos / n, neg / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_land_in_the_central_bin() {
        let h = HistogramDump::from_values(ProbeSource::DepthwiseWeights, "x", &[0.0; 17], HISTOGRAM_BINS);
        assert_eq!(h.counts[50], 17);
        assert_eq!(h.total(), 17);
        assert_eq!(h.edges[0], -1.0);
    }

    #[test]
    fn edges_are_symmetric_and_increasing() {
        let vals: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let h = HistogramDump::from_values(ProbeSource::DepthwiseWeights, "x", &vals, HISTOGRAM_BINS);
        assert_eq!(h.total(), 1000);
        assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
        for i in 0..h.edges.len() {
            assert_eq!(h.edges[i], -h.edges[h.edges.len() - 1 - i]);
        }
        let csv = h.to_csv();
        assert!(csv.starts_with("bin_left,bin_right,count\n"));
        assert_eq!(csv.lines().count(), 102);
    }

    #[test]
    fn extremes_are_counted() {
        let h = HistogramDump::from_values(ProbeSource::DepthwiseWeights, "x", &[-2.0, 2.0, 1.0], 5);
        assert_eq!(h.counts, [1, 0, 0, 1, 1]);
    }

    #[test]
    fn probe_matching() {
        let p = Probe::new(ProbeSource::DepthwiseWeights, "block1");
        assert!(p.matches("block1.dw"));
        assert!(!p.matches("block10.dw"));
        assert!(Probe::new(ProbeSource::DepthwiseWeights, "all").matches("s2.u1.dw"));
    }
}
