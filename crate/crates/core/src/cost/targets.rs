//! Reference targets and deviation reports.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{count_flops, CostReport};
use crate::arch::NetDescription;
use crate::error::{Error, Result};

/// The targets file shipped with the crate.
pub const BUNDLED_TARGETS: &str = include_str!("../../data/targets.toml");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamBasis {
    #[default]
    Learnable,
    Stored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub name: String,
    #[serde(default)]
    pub source: String,
    pub network: NetDescription,
    pub params: Option<f64>,
    #[serde(default)]
    pub params_tolerance: f64,
    #[serde(default)]
    pub param_basis: ParamBasis,
    pub flops: Option<f64>,
    #[serde(default)]
    pub flops_tolerance: f64,
}

impl Target {
    /// A target that expects exactly the totals of `report`.
    pub fn from_report(name: impl Into<String>, network: NetDescription, report: &CostReport, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            source: report.label.clone(),
            network,
            params: Some(report.totals.params as f64),
            params_tolerance: tolerance,
            param_basis: ParamBasis::Learnable,
            flops: Some(report.totals.flops as f64),
            flops_tolerance: tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionTarget {
    pub name: String,
    #[serde(default)]
    pub source: String,
    pub subject: String,
    pub reference: String,
    /// Percent.
    pub params_reduction: Option<f64>,
    /// Percent.
    pub flops_reduction: Option<f64>,
    /// Percentage points.
    pub tolerance_pp: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    #[serde(default, rename = "target")]
    pub targets: Vec<Target>,
    #[serde(default, rename = "reduction")]
    pub reductions: Vec<ReductionTarget>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Unchecked,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unchecked => "unchecked",
        })
    }
}

/// One measured figure against its reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub target: String,
    pub metric: &'static str,
    pub measured: f64,
    pub expected: Option<f64>,
    /// Relative deviation in percent for absolute figures, or the difference
    /// in percentage points for reductions.
    pub deviation: Option<f64>,
    /// Same unit as `deviation`.
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl Comparison {
    fn relative(target: &str, metric: &'static str, measured: f64, expected: Option<f64>, tolerance: f64) -> Self {
        let deviation = expected.map(|e| if e == 0.0 { 0.0 } else { 100.0 * (measured - e) / e });
        Self::judge(target, metric, measured, expected, deviation, 100.0 * tolerance)
    }

    fn judge(
        target: &str,
        metric: &'static str,
        measured: f64,
        expected: Option<f64>,
        deviation: Option<f64>,
        tolerance: f64,
    ) -> Self {
        let verdict = match deviation {
            None => Verdict::Unchecked,
            Some(d) if d.abs() <= tolerance + 1e-12 => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        Self {
            target: target.to_string(),
            metric,
            measured,
            expected,
            deviation,
            tolerance,
            verdict,
        }
    }

    fn is_reduction(&self) -> bool {
        self.metric.ends_with("reduction")
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (scale, unit) = if self.is_reduction() { (1.0, "%") } else { (1e-6, "M") };
        let expected = self
            .expected
            .map_or("-".to_string(), |e| format!("{:.2}{unit}", e * scale));
        let (dev, tol) = if self.is_reduction() {
            (
                self.deviation.map_or("-".into(), |d| format!("{d:+.2}pp")),
                format!("{:.1}pp", self.tolerance),
            )
        } else {
            (
                self.deviation.map_or("-".into(), |d| format!("{d:+.2}%")),
                format!("{:.0}%", self.tolerance),
            )
        };
        write!(
            f,
            "{:<30} {:<17} {:>10} {:>10} {:>9} {:>7}  {}",
            self.target,
            self.metric,
            format!("{:.3}{unit}", self.measured * scale),
            expected,
            dev,
            tol,
            self.verdict
        )
    }
}

/// Header matching the [`Comparison`] `Display` columns.
pub fn comparison_header() -> String {
    format!(
        "{:<30} {:<17} {:>10} {:>10} {:>9} {:>7}  verdict",
        "target", "metric", "measured", "expected", "dev", "tol"
    )
}

/// Checks one report against one target's params and FLOPs.
pub fn compare_to_targets(report: &CostReport, target: &Target) -> Vec<Comparison> {
    let (metric, measured) = match target.param_basis {
        ParamBasis::Learnable => ("params", report.totals.params),
        ParamBasis::Stored => ("params(stored)", report.totals.stored()),
    };
    vec![
        Comparison::relative(
            &target.name,
            metric,
            measured as f64,
            target.params,
            target.params_tolerance,
        ),
        Comparison::relative(
            &target.name,
            "flops",
            report.totals.flops as f64,
            target.flops,
            target.flops_tolerance,
        ),
    ]
}

fn reduction(subject: u64, reference: u64) -> f64 {
    100.0 * (1.0 - subject as f64 / reference as f64)
}

impl TargetFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("targets file: {}", e.message())))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TARGETS).expect("bundled targets parse")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn find(&self, name: &str) -> Option<&Target> {
        self.targets.iter().find(|t| t.name == name)
    }

    /// Builds and costs every target network (at its declared input size),
    /// then checks absolute figures and reductions.
    pub fn evaluate(&self) -> Result<Vec<Comparison>> {
        let mut reports: HashMap<&str, CostReport> = HashMap::new();
        let mut out = Vec::new();
        for t in &self.targets {
            let net = t.network.build()?;
            let report = count_flops(&net, net.input_size)?;
            out.extend(compare_to_targets(&report, t));
            reports.insert(&t.name, report);
        }
        for r in &self.reductions {
            let pair = reports.get(r.subject.as_str()).zip(reports.get(r.reference.as_str()));
            let metrics = [
                (
                    "params_reduction",
                    r.params_reduction,
                    pair.map(|(s, b)| reduction(s.totals.params, b.totals.params)),
                ),
                (
                    "flops_reduction",
                    r.flops_reduction,
                    pair.map(|(s, b)| reduction(s.totals.flops, b.totals.flops)),
                ),
            ];
            for (metric, expected, measured) in metrics {
                let deviation = measured.zip(expected).map(|(m, e)| m - e);
                out.push(Comparison::judge(
                    &r.name,
                    metric,
                    measured.unwrap_or(f64::NAN),
                    expected,
                    deviation,
                    r.tolerance_pp,
                ));
            }
        }
        Ok(out)
    }
}
