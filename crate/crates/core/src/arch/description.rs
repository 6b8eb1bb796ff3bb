//! TOML network description files.
//!
//! ```toml
//! family = "mobilenet_v1"   # shufflenet_v2 | mobilenet_v1 | tiny
//! width = 1.0
//! num_classes = 100
//! input_size = 32           # or [h, w]
//! variant = "ctpc"          # baseline | rcpc | ctpc_relu | ctpc
//! transform = "dwht"        # dwht | dct, CTPC variants only
//! scheme = "DWHT-6-H"       # optional; omitted = every eligible block
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scheme::{apply_substitution, parse_scheme_name, SubstitutionScheme};
use super::{build, BlockVariant, Family, NetworkSpec, VariantTag};
use crate::error::{Error, Result};
use crate::transforms::TransformKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSize {
    Square(usize),
    Rect([usize; 2]),
}

impl InputSize {
    pub fn dims(self) -> (usize, usize) {
        match self {
            InputSize::Square(s) => (s, s),
            InputSize::Rect([h, w]) => (h, w),
        }
    }
}

fn default_width() -> f64 {
    1.0
}
fn default_classes() -> usize {
    100
}
fn default_input() -> InputSize {
    InputSize::Square(32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetDescription {
    pub family: Family,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default = "default_input")]
    pub input_size: InputSize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
}

impl NetDescription {
    pub fn baseline(family: Family, width: f64, num_classes: usize, input_size: usize) -> Self {
        Self {
            family,
            width,
            num_classes,
            input_size: InputSize::Square(input_size),
            variant: None,
            transform: None,
            scheme: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("network description: {}", e.message())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("description serializes")
    }

    /// Resolves variant, transform and scheme into a block variant plus the
    /// scheme to apply (`None` = every eligible block).
    ///
    /// A transform prefix in `scheme` fills in `transform`, and implies the
    /// `ctpc` variant when `variant` is absent.
    pub fn resolve(&self) -> Result<(BlockVariant, Option<SubstitutionScheme>)> {
        let (prefix, scheme) = match &self.scheme {
            Some(s) => {
                let (k, sc) = parse_scheme_name(s)?;
                (k, Some(sc))
            }
            None => (None, None),
        };
        let transform = match (self.transform, prefix) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "transform = {a} conflicts with scheme prefix {b}"
                )));
            }
            (a, b) => a.or(b),
        };
        let tag = match (self.variant, transform) {
            (Some(v), _) => v,
            (None, Some(_)) => VariantTag::Ctpc,
            (None, None) => VariantTag::Baseline,
        };
        Ok((BlockVariant::new(tag, transform)?, scheme))
    }

    pub fn build(&self) -> Result<NetworkSpec> {
        let net = build(self.family, self.width, self.num_classes, self.input_size.dims())?;
        let (variant, scheme) = self.resolve()?;
        let scheme = scheme.unwrap_or_else(|| SubstitutionScheme::low(net.eligible_blocks().len()));
        apply_substitution(&net, variant, scheme)
    }
}
