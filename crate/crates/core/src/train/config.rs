//! Training hyper-parameters.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Multiplicative decay applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub momentum: f64,
    pub weight_decay_default: f64,
    /// Weight decay per parameter group, overriding the default.
    pub weight_decay_overrides: BTreeMap<String, f64>,
    pub seed: u64,
    /// Random crop (pad 2) and horizontal flip on training batches.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 200,
            initial_lr: 0.1,
            lr_decay: 0.94,
            lr_decay_every: 2,
            momentum: 0.9,
            weight_decay_default: 5e-4,
            weight_decay_overrides: BTreeMap::new(),
            seed: 0,
            augment: false,
        }
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(format!("train config: {}", e.message())))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be positive".into());
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("initial_lr must be positive, got {}", self.initial_lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must be in (0, 1], got {}", self.lr_decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        for (g, wd) in std::iter::once(("default", &self.weight_decay_default))
            .chain(self.weight_decay_overrides.iter().map(|(g, w)| (g.as_str(), w)))
        {
            if !(*wd >= 0.0 && wd.is_finite()) {
                return bad(format!("weight decay for group '{g}' must be non-negative, got {wd}"));
            }
        }
        Ok(())
    }

    /// Also checks that every override names a parameter group of `net`.
    pub fn validate_for(&self, net: &Network) -> Result<()> {
        self.validate()?;
        let params = net.params();
        for g in self.weight_decay_overrides.keys() {
            if !params.iter().any(|p| &p.weight_decay_group == g) {
                return Err(Error::Config(format!("weight decay override for unknown group '{g}'")));
            }
        }
        Ok(())
    }

    pub fn weight_decay_for(&self, group: &str) -> f64 {
        self.weight_decay_overrides
            .get(group)
            .copied()
            .unwrap_or(self.weight_decay_default)
    }
}

/// `initial_lr · lr_decay^⌊epoch / lr_decay_every⌋`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    config.initial_lr * config.lr_decay.powi((epoch / config.lr_decay_every) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(&c, 0), 0.1);
        assert_eq!(lr_at(&c, 1), 0.1);
        assert!((lr_at(&c, 2) - 0.094).abs() < 1e-15);
        assert!((lr_at(&c, 5) - 0.08836).abs() < 1e-15);
    }

    #[test]
    fn parse_and_validate() {
        let c = TrainConfig::parse("epochs = 3\nbatch_size = 16\n[weight_decay_overrides]\nlast3_dw = 0.01").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.weight_decay_for("last3_dw"), 0.01);
        assert_eq!(c.weight_decay_for("default"), 5e-4);
        assert!(TrainConfig::parse("momentum = 1.5").is_err());
        assert!(TrainConfig::parse("initial_lr = 0").is_err());
        assert!(TrainConfig::parse("learning_rate = 0.1").is_err());
    }
}
