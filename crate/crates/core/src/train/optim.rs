//! Plain momentum SGD with L2 weight decay.

use super::config::{lr_at, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::ParamTensor;

/// Momentum SGD: `v ← μ·v + (g + λ·w)`, `w ← w − η·v`, with `λ` chosen per
/// weight-decay group. Frozen parameters are skipped entirely.
#[derive(Clone, Debug, Default)]
pub struct Sgd {
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one update at learning rate `lr`. Fails without touching any
    /// parameter if a learnable gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut ParamTensor], lr: f64, config: &TrainConfig) -> Result<()> {
        for p in params.iter().filter(|p| p.learnable) {
            if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite gradient {} in {}[{i}]",
                    p.grad[i], p.name
                )));
            }
        }
        if self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            if !p.learnable {
                continue;
            }
            let wd = config.weight_decay_for(&p.weight_decay_group);
            for ((w, g), v) in p.values.iter_mut().zip(&p.grad).zip(v.iter_mut()) {
                *v = config.momentum * *v + (g + wd * *w);
                *w -= lr * *v;
            }
        }
        Ok(())
    }
}

/// One optimizer step at the scheduled learning rate for `epoch`.
pub fn sgd_step(opt: &mut Sgd, params: &mut [&mut ParamTensor], config: &TrainConfig, epoch: usize) -> Result<()> {
    opt.step(params, lr_at(config, epoch), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64, g: f64) -> ParamTensor {
        let mut p = ParamTensor::new("w", vec![1], vec![w], true);
        p.grad[0] = g;
        p
    }

    #[test]
    fn decay_only_update() {
        let mut p = scalar(1.0, 0.0);
        let c = TrainConfig {
            momentum: 0.0,
            weight_decay_default: 0.1,
            ..TrainConfig::default()
        };
        Sgd::new().step(&mut [&mut p], 1.0, &c).unwrap();
        assert!((p.values[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_zero_decay_is_noop() {
        let mut p = scalar(0.7, 0.0);
        let c = TrainConfig {
            weight_decay_default: 0.0,
            ..TrainConfig::default()
        };
        let mut opt = Sgd::new();
        for _ in 0..3 {
            opt.step(&mut [&mut p], 0.1, &c).unwrap();
        }
        assert_eq!(p.values[0], 0.7);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = scalar(0.0, 1.0);
        let c = TrainConfig {
            weight_decay_default: 0.0,
            ..TrainConfig::default()
        };
        let mut opt = Sgd::new();
        opt.step(&mut [&mut p], 0.1, &c).unwrap();
        opt.step(&mut [&mut p], 0.1, &c).unwrap();
        // v1 = 1, v2 = 1.9
        assert!((p.values[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn overrides_and_frozen() {
        let mut a = scalar(1.0, 0.0).with_group("last3_dw");
        let mut b = scalar(1.0, 0.0);
        let mut frozen = ParamTensor::new("f", vec![1], vec![1.0], false);
        frozen.grad[0] = 5.0;
        let mut c = TrainConfig {
            momentum: 0.0,
            ..TrainConfig::default()
        };
        c.weight_decay_overrides.insert("last3_dw".into(), 0.1);
        Sgd::new().step(&mut [&mut a, &mut b, &mut frozen], 1.0, &c).unwrap();
        assert!((a.values[0] - 0.9).abs() < 1e-15);
        assert!((b.values[0] - (1.0 - 5e-4)).abs() < 1e-15);
        assert_eq!(frozen.values[0], 1.0);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = scalar(1.0, f64::NAN);
        let err = Sgd::new()
            .step(&mut [&mut p], 0.1, &TrainConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert_eq!(p.values[0], 1.0);
    }
}
