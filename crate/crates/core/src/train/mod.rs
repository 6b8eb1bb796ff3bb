//! Desk-scale training: configuration, momentum SGD, datasets, the epoch
//! loop and histogram probes.

pub mod config;
pub mod data;
pub mod desk;
pub mod histogram;
pub mod optim;
pub mod trainer;

pub use config::{lr_at, TrainConfig};
pub use data::{
    encode_raw, load_dataset, parse_cifar, parse_raw, synthetic_channel_patterns, Dataset, DatasetFormat, LoadOptions,
    SyntheticSpec,
};
pub use desk::DeskExperiment;
pub use histogram::{dump_histogram, probe_values, sign_fractions, HistogramDump, Probe, ProbeSource, HISTOGRAM_BINS};
pub use optim::{sgd_step, Sgd};
pub use trainer::{evaluate, mean_std, run_seeds, train, train_with, EpochMetrics, SeedSummary, TrainReport};
