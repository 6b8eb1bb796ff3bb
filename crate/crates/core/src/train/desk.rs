//! The desk-scale learnability experiment: one fixed synthetic task, one
//! training budget and three seeds, shared by the acceptance test and the
//! `train_synthetic` example.

use crate::arch::{apply_substitution, build_tiny, BlockVariant, NetworkSpec, SubstitutionScheme};
use crate::error::Result;
use crate::train::{run_seeds, synthetic_channel_patterns, Dataset, SeedSummary, SyntheticSpec, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct DeskExperiment {
    pub task: SyntheticSpec,
    /// Width multiplier of the tiny network (16·width channels).
    pub width: f64,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
}

impl Default for DeskExperiment {
    fn default() -> Self {
        Self {
            task: SyntheticSpec {
                classes: 8,
                channels: 3,
                size: 12,
                train_samples: 512,
                eval_samples: 512,
                noise: 3.0,
                seed: 0,
            },
            width: 0.5,
            config: TrainConfig {
                epochs: 30,
                batch_size: 32,
                ..TrainConfig::default()
            },
            seeds: vec![0, 1, 2],
        }
    }
}

impl DeskExperiment {
    pub fn data(&self) -> Result<(Dataset, Dataset)> {
        synthetic_channel_patterns(&self.task)
    }

    /// The tiny network with every eligible block set to `variant`.
    pub fn network(&self, variant: BlockVariant) -> Result<NetworkSpec> {
        let base = build_tiny(self.width, self.task.classes, (self.task.size, self.task.size))?;
        let all = SubstitutionScheme::low(base.eligible_blocks().len());
        apply_substitution(&base, variant, all)
    }

    pub fn run(&self, variant: BlockVariant, train: &Dataset, eval: &Dataset) -> Result<SeedSummary> {
        let net = self.network(variant)?;
        run_seeds(|seed| net.instantiate(seed), train, eval, &self.config, &self.seeds)
    }
}
