//! Epoch loop, evaluation, metrics logging and multi-seed summaries.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{lr_at, TrainConfig};
use super::data::{augment_batch, Dataset};
use super::optim::Sgd;
use crate::error::{Error, Result};
use crate::nn::{accuracy, softmax_cross_entropy, Mode, Network};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub eval_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    pub metrics: Vec<EpochMetrics>,
}

impl TrainReport {
    pub fn final_eval_acc(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.eval_acc)
    }

    pub fn final_train_acc(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.train_acc)
    }

    /// CSV with columns `epoch,lr,train_loss,train_acc,eval_acc`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.into());
        out.write_record(["epoch", "lr", "train_loss", "train_acc", "eval_acc"])
            .map_err(io)?;
        for m in &self.metrics {
            out.write_record([
                m.epoch.to_string(),
                format!("{}", m.lr),
                format!("{}", m.train_loss),
                format!("{}", m.train_acc),
                format!("{}", m.eval_acc),
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

/// Accuracy over `data` in eval mode (running batch-norm statistics).
pub fn evaluate(net: &mut Network, data: &Dataset, batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = data.batch(chunk);
        let logits = net.forward(&x, Mode::Eval)?;
        hits += accuracy(&logits, &y) * chunk.len() as f64;
    }
    Ok(hits / data.len() as f64)
}

/// Trains `net` on `train`, evaluating on `eval` after every epoch.
/// `on_epoch` sees each epoch's metrics as they are produced.
pub fn train_with(
    net: &mut Network,
    train: &Dataset,
    eval: &Dataset,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainReport> {
    config.validate_for(net)?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let want = net.input_shape();
    let [_, c, h, w] = train.images.dims();
    if (c, h, w) != (want.channels, want.height, want.width) {
        return Err(Error::Shape(format!(
            "dataset images are {c}x{h}x{w}, network expects {want}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Sgd::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hit_sum) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let (mut x, y) = train.batch(chunk);
            if config.augment {
                x = augment_batch(&x, &mut rng);
            }
            net.zero_grad();
            let logits = net.forward(&x, Mode::Train)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            net.backward(&grad)?;
            opt.step(&mut net.params_mut(), lr, config)?;
            loss_sum += loss * chunk.len() as f64;
            hit_sum += accuracy(&logits, &y) * chunk.len() as f64;
        }
        let m = EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            train_acc: hit_sum / train.len() as f64,
            eval_acc: evaluate(net, eval, config.batch_size)?,
        };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainReport {
        seed: config.seed,
        metrics,
    })
}

pub fn train(net: &mut Network, train: &Dataset, eval: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    train_with(net, train, eval, config, &mut |_| {})
}

/// Final eval accuracies over several seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSummary {
    pub reports: Vec<TrainReport>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single seed).
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Trains a freshly built network per seed. The seed drives both weight
/// initialization and data order.
pub fn run_seeds(
    build: impl Fn(u64) -> Result<Network>,
    train_set: &Dataset,
    eval_set: &Dataset,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<SeedSummary> {
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut net = build(seed)?;
        let cfg = TrainConfig { seed, ..config.clone() };
        reports.push(train(&mut net, train_set, eval_set, &cfg)?);
    }
    let finals: Vec<f64> = reports.iter().map(TrainReport::final_eval_acc).collect();
    let (mean, std) = mean_std(&finals);
    Ok(SeedSummary { reports, mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{LayerSpec, NamedLayer, Shape, SpecNode};
    use crate::tensor::Tensor4;

    fn toy_data(n: usize) -> Dataset {
        // class = sign of channel 0 mean
        let images = Tensor4::from_fn([n, 2, 2, 2], |b, c, h, w| {
            let s = if b % 2 == 0 { 1.0 } else { -1.0 };
            if c == 0 {
                s * (1.0 + 0.1 * (h + w) as f64)
            } else {
                ((b * 7 + h * 3 + w) % 5) as f64 / 5.0 - 0.4
            }
        });
        Dataset::new(images, (0..n).map(|b| b % 2).collect(), 2).unwrap()
    }

    fn toy_net(seed: u64) -> Result<Network> {
        let nodes = vec![
            SpecNode::Layer(NamedLayer::new(
                "pw",
                LayerSpec::PointwiseConv {
                    in_channels: 2,
                    out_channels: 4,
                    frozen: false,
                },
            )),
            SpecNode::Layer(NamedLayer::new("gap", LayerSpec::GlobalAvgPool)),
            SpecNode::Layer(NamedLayer::new(
                "fc",
                LayerSpec::FullyConnected {
                    in_features: 4,
                    out_features: 2,
                },
            )),
        ];
        Network::new(&nodes, Shape::new(2, 2, 2), seed)
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let data = toy_data(32);
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let mut net = toy_net(1).unwrap();
        let report = train(&mut net, &data, &data, &cfg).unwrap();
        assert!(report.final_train_acc() >= 0.99, "{:?}", report.metrics.last());
        assert_eq!(report.metrics.len(), 50);
    }

    #[test]
    fn deterministic() {
        let data = toy_data(16);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let a = train(&mut toy_net(3).unwrap(), &data, &data, &cfg).unwrap();
        let b = train(&mut toy_net(3).unwrap(), &data, &data, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("epoch,lr,train_loss,train_acc,eval_acc\n"));
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy_data(8);
        let cfg = TrainConfig {
            epochs: 100,
            batch_size: 8,
            initial_lr: 1e8,
            momentum: 0.0,
            lr_decay: 1.0,
            ..TrainConfig::default()
        };
        let err = train(&mut toy_net(1).unwrap(), &data, &data, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. } | Error::Numerical(_)), "{err}");
    }

    #[test]
    fn summary_statistics() {
        let (m, s) = mean_std(&[0.5, 0.7, 0.9]);
        assert!((m - 0.7).abs() < 1e-12);
        assert!((s - 0.2).abs() < 1e-12);
    }
}
