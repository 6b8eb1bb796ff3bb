//! The `ctpc` command line. [`run`] parses arguments, dispatches to one
//! subcommand and maps the outcome to an exit code:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | invalid input or numerical failure |
//! | 2 | usage error (bad or unknown flags) |
//! | 3 | verification or target comparison failed |
//! | 4 | I/O error or malformed file |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arch::{Family, InputSize, NetDescription, NetworkSpec, VariantTag};
use crate::bench::{run_bench, write_bench_csv};
use crate::cost::{compare_to_targets, comparison_header, count_flops, Comparison, TargetFile, Verdict};
use crate::error::Error;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::spec::expanded_listing;
use crate::tensor::Tensor4;
use crate::train::{
    dump_histogram, load_dataset, mean_std, synthetic_channel_patterns, train_with, Dataset, DatasetFormat,
    DeskExperiment, LoadOptions, Probe, ProbeSource, SyntheticSpec, TrainConfig,
};
use crate::transforms::{dct_naive, dwht_naive, transform_forward, PcEvaluation, TransformKind, TransformSpec};
use crate::verify::{run_verify, TargetSource, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable that supplies `--seed` / `--seeds` when the flag is
/// absent.
pub const SEED_ENV: &str = "CTPC_SEED";

#[derive(Debug, Parser)]
#[command(name = "ctpc", version, about = "Conventional-transform pointwise convolutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a DWHT or DCT to channel vectors.
    Transform(TransformArgs),
    /// Time pointwise evaluations and print their operation counts as CSV.
    Bench(BenchArgs),
    /// Print the expanded layer list of a network description.
    Build(BuildArgs),
    /// Per-layer parameter and FLOP table of a network.
    Analyze(AnalyzeArgs),
    /// Check every reference target (params, FLOPs, reductions).
    Compare(CompareArgs),
    /// Train a network and write metrics, checkpoints and histograms.
    Train(Box<TrainArgs>),
    /// Histograms of a checkpoint's depthwise weights or transform activations.
    Inspect(InspectArgs),
    /// Run the self-check matrix.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub kind: TransformKind,
    /// Butterfly evaluation (power-of-two lengths only).
    #[arg(long, conflicts_with = "naive")]
    pub fast: bool,
    /// Dense matrix evaluation (the default).
    #[arg(long)]
    pub naive: bool,
    /// Comma-separated input vector.
    #[arg(
        long = "in",
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "input",
        required_unless_present = "input"
    )]
    pub values: Vec<f64>,
    /// File with one vector per line (comma or whitespace separated).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output length M (default: input length).
    #[arg(long)]
    pub out_channels: Option<usize>,
    /// Zero-pad to the next power of two.
    #[arg(long)]
    pub pad_pow2: bool,
    /// Also evaluate the other path and print the max deviation.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Evaluations to time: naive-pc, fast-dwht, naive-dct, fast-dct.
    #[arg(long, value_delimiter = ',', default_value = "naive-pc,fast-dwht,naive-dct,fast-dct")]
    pub kinds: Vec<PcEvaluation>,
    #[arg(long, default_value_t = 0)]
    pub min_log2: u32,
    #[arg(long, default_value_t = 10)]
    pub max_log2: u32,
    /// Timed repetitions; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Network selection by inline flags; each flag overrides the description
/// file when both are given.
#[derive(Debug, Args, Default)]
pub struct NetFlags {
    /// shufflenet_v2, mobilenet_v1 or tiny.
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Square input resolution.
    #[arg(long)]
    pub input_size: Option<usize>,
    /// baseline, rcpc, ctpc_relu or ctpc (also a, b, c, d).
    #[arg(long)]
    pub variant: Option<VariantTag>,
    #[arg(long)]
    pub transform: Option<TransformKind>,
    /// Substitution scheme such as 6-H, 3-M-Front or DWHT-6-H.
    #[arg(long)]
    pub scheme: Option<String>,
}

impl NetFlags {
    fn describe(&self, file: Option<&Path>, default_family: Option<Family>) -> crate::Result<NetDescription> {
        let mut d = match (file, self.family.or(default_family)) {
            (Some(p), _) => NetDescription::load(p)?,
            (None, Some(f)) => NetDescription::baseline(f, 1.0, 100, 32),
            (None, None) => return Err(Error::Config("give --config FILE or --family".into())),
        };
        if let Some(f) = self.family {
            d.family = f;
        }
        if let Some(w) = self.width {
            d.width = w;
        }
        if let Some(c) = self.classes {
            d.num_classes = c;
        }
        if let Some(s) = self.input_size {
            d.input_size = InputSize::Square(s);
        }
        if self.variant.is_some() {
            d.variant = self.variant;
        }
        if self.transform.is_some() {
            d.transform = self.transform;
        }
        if self.scheme.is_some() {
            d.scheme = self.scheme.clone();
        }
        Ok(d)
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Network description file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub net: NetFlags,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Network description file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub net: NetFlags,
    /// Also write the per-layer CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Compare against matching reference targets (bundled unless a file is
    /// given).
    #[arg(long, num_args = 0..=1)]
    pub compare: Option<Option<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Targets file (default: the bundled one).
    #[arg(long)]
    pub targets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training configuration file (TOML); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network description file (TOML). Without it or --family the tiny
    /// family is used.
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[command(flatten)]
    pub net_flags: NetFlags,

    /// Dataset file. Without it the synthetic channel-pattern task is used.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// raw, cifar10, cifar100 or synthetic (a TOML generator spec).
    #[arg(long, default_value = "raw")]
    pub format: DatasetFormat,
    /// Held-out fraction for single-file datasets.
    #[arg(long, default_value_t = 0.2)]
    pub eval_fraction: f64,
    /// Keep at most this many records.
    #[arg(long)]
    pub limit: Option<usize>,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Per-group weight decay, e.g. `last3_dw=0.01` (repeatable).
    #[arg(long = "wd-override", value_name = "GROUP=VALUE")]
    pub wd_overrides: Vec<String>,
    /// Random crop and horizontal flip.
    #[arg(long)]
    pub augment: bool,
    /// Seeds to train, comma separated; each gets its own run.
    #[arg(long, value_delimiter = ',', env = SEED_ENV)]
    pub seeds: Vec<u64>,

    /// Directory for metrics CSVs, checkpoints and histograms. Without it
    /// the metrics CSV is printed.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Histogram after training, as SOURCE[:LOCATION] with SOURCE one of
    /// `dw` / `transform_activation` (repeatable; needs --out-dir).
    #[arg(long = "histogram", value_name = "SOURCE[:LOCATION]", requires = "out_dir")]
    pub histograms: Vec<String>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `dw` (depthwise weights) or `transform_activation`.
    #[arg(long, default_value = "dw")]
    pub source: ProbeSource,
    /// `all`, a layer name or a block prefix.
    #[arg(long, default_value = "all")]
    pub location: String,
    /// Leave out the DC output channel of transform activations.
    #[arg(long)]
    pub skip_dc: bool,
    /// Zero-mean Gaussian inputs fed through the net for activation probes.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 0, env = SEED_ENV)]
    pub seed: u64,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Targets file (default: the bundled one).
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Negative control: corrupt one entry of the reference Hadamard matrix.
    #[arg(long)]
    pub perturb_hadamard: bool,
    #[arg(long, default_value_t = 0, env = SEED_ENV)]
    pub seed: u64,
}

/// What a subcommand failed with.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the subcommand with output to
/// `out` and diagnostics to `err`, and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Verify(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_VERIFY
        }
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Io(_) | Error::Malformed(_) => EXIT_IO,
                _ => EXIT_FAILURE,
            }
        }
    }
}

/// Entry point of the `ctpc` binary.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Transform(a) => cmd_transform(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Build(a) => cmd_build(&a, out),
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Compare(a) => cmd_compare(&a, out),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Inspect(a) => cmd_inspect(&a, out, err),
        Command::Verify(a) => cmd_verify(&a, out),
    }
}

fn format_vector(v: &[f64]) -> String {
    // `+ 0.0` turns -0 into 0
    v.iter().map(|x| format!("{}", x + 0.0)).collect::<Vec<_>>().join(",")
}

fn parse_vectors(text: &str) -> crate::Result<Vec<Vec<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| Error::Malformed(format!("'{t}': {e}"))))
                .collect()
        })
        .collect()
}

fn apply_transform(x: &[f64], spec: &TransformSpec) -> crate::Result<Vec<f64>> {
    match (spec.fast, spec.kind) {
        (true, _) => Ok(transform_forward(&Tensor4::from_channel_vector(x)?, spec)?.into_data()),
        (false, TransformKind::Dwht) => dwht_naive(x, spec),
        (false, TransformKind::Dct) => dct_naive(x, spec),
    }
}

fn cmd_transform(a: &TransformArgs, out: &mut dyn Write) -> CmdResult {
    let vectors = match &a.input {
        Some(p) => parse_vectors(&fs::read_to_string(p)?)?,
        None => vec![a.values.clone()],
    };
    for x in &vectors {
        let m = a.out_channels.unwrap_or(x.len());
        let spec = TransformSpec::unchecked(a.kind, x.len(), m, a.fast, a.pad_pow2);
        spec.validate()?;
        let y = apply_transform(x, &spec)?;
        writeln!(out, "{}", format_vector(&y))?;
        if a.check {
            let other = TransformSpec { fast: !a.fast, ..spec };
            other.validate()?;
            let z = apply_transform(x, &other)?;
            let dev = y.iter().zip(&z).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            writeln!(out, "max deviation (fast vs naive): {dev:e}")?;
        }
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    if a.min_log2 > a.max_log2 || a.max_log2 > 16 {
        return Err(Error::Config("need min-log2 <= max-log2 <= 16".into()).into());
    }
    let sizes: Vec<usize> = (a.min_log2..=a.max_log2).map(|d| 1usize << d).collect();
    let rows = run_bench(&a.kinds, &sizes, a.reps)?;
    match &a.out {
        Some(p) => write_bench_csv(&rows, fs::File::create(p)?)?,
        None => write_bench_csv(&rows, out)?,
    }
    Ok(())
}

fn cmd_build(a: &BuildArgs, out: &mut dyn Write) -> CmdResult {
    let desc = a.net.describe(a.config.as_deref(), None)?;
    let net = desc.build()?;
    writeln!(out, "# {net}")?;
    for line in desc.to_toml().lines() {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{:<28} {:<40} output", "layer", "kind")?;
    for (name, kind, shape) in expanded_listing(&net.to_nodes()?, net.input_shape())? {
        writeln!(out, "{name:<28} {kind:<40} {shape}")?;
    }
    Ok(())
}

fn load_targets(path: Option<&Path>) -> crate::Result<TargetFile> {
    match path {
        Some(p) => TargetFile::load(p),
        None => Ok(TargetFile::bundled()),
    }
}

fn print_comparisons(rows: &[Comparison], out: &mut dyn Write) -> CmdResult {
    writeln!(out, "{}", comparison_header())?;
    for c in rows {
        writeln!(out, "{c}")?;
    }
    let failed = rows.iter().filter(|c| c.verdict == Verdict::Fail).count();
    if failed > 0 {
        return Err(Failure::Verify(format!("{failed} comparison(s) out of tolerance")));
    }
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> CmdResult {
    let desc = a.net.describe(a.config.as_deref(), None)?;
    let net = desc.build()?;
    let report = count_flops(&net, net.input_size)?;
    writeln!(out, "{report}")?;
    if let Some(p) = &a.csv {
        report.write_csv(fs::File::create(p)?)?;
    }
    if let Some(file) = &a.compare {
        let targets = load_targets(file.as_deref())?;
        let mut rows = Vec::new();
        for t in &targets.targets {
            if t.network.build().ok().as_ref() == Some(&net) {
                rows.extend(compare_to_targets(&report, t));
            }
        }
        writeln!(out)?;
        if rows.is_empty() {
            writeln!(out, "no reference target describes this network")?;
        } else {
            print_comparisons(&rows, out)?;
        }
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> CmdResult {
    let rows = load_targets(a.targets.as_deref())?.evaluate()?;
    print_comparisons(&rows, out)
}

/// Metadata stored in training checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub network: NetDescription,
}

impl RunMeta {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metadata serializes")
    }

    pub fn parse(text: &str) -> crate::Result<Self> {
        toml::from_str(text).map_err(|e| Error::Malformed(format!("checkpoint metadata: {}", e.message())))
    }
}

fn train_config(a: &TrainArgs) -> crate::Result<TrainConfig> {
    let mut c = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { c.$field = v; })*
        };
    }
    set!(epochs => epochs, batch_size => batch_size, lr => initial_lr, lr_decay => lr_decay,
         lr_decay_every => lr_decay_every, momentum => momentum, weight_decay => weight_decay_default);
    for o in &a.wd_overrides {
        let (group, value) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--wd-override expects GROUP=VALUE, got '{o}'")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("--wd-override value '{value}' is not a number")))?;
        c.weight_decay_overrides.insert(group.to_string(), value);
    }
    c.augment |= a.augment;
    c.validate()?;
    Ok(c)
}

fn train_data(a: &TrainArgs, seed: u64) -> crate::Result<(Dataset, Dataset)> {
    match &a.dataset {
        Some(p) => load_dataset(
            p,
            a.format,
            LoadOptions {
                eval_fraction: a.eval_fraction,
                seed,
                limit: a.limit,
            },
        ),
        None => {
            let task = SyntheticSpec {
                seed,
                ..DeskExperiment::default().task
            };
            synthetic_channel_patterns(&task)
        }
    }
}

fn parse_histogram_flag(s: &str) -> crate::Result<Probe> {
    let (source, location) = s.split_once(':').unwrap_or((s, "all"));
    Ok(Probe::new(source.parse()?, location))
}

fn sample_images(data: &Dataset, max: usize) -> Tensor4 {
    let idx: Vec<usize> = (0..data.len().min(max)).collect();
    data.images.select_batch(&idx)
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut config = train_config(a)?;
    let probes = a
        .histograms
        .iter()
        .map(|h| parse_histogram_flag(h))
        .collect::<crate::Result<Vec<_>>>()?;
    let seeds = if a.seeds.is_empty() {
        vec![config.seed]
    } else {
        a.seeds.clone()
    };
    // the data split is fixed by the first seed so that runs share it
    let (train, eval) = train_data(a, seeds[0])?;
    let mut desc = a.net_flags.describe(a.net.as_deref(), Some(Family::Tiny))?;
    let [_, _, h, w] = train.images.dims();
    desc.num_classes = train.num_classes;
    desc.input_size = if h == w {
        InputSize::Square(h)
    } else {
        InputSize::Rect([h, w])
    };
    let spec: NetworkSpec = desc.build()?;
    writeln!(err, "{spec}; {} train / {} eval samples", train.len(), eval.len())?;
    if let Some(d) = &a.out_dir {
        fs::create_dir_all(d)?;
    }
    let mut finals = Vec::new();
    for &seed in &seeds {
        config.seed = seed;
        let mut net = spec.instantiate(seed)?;
        let report = train_with(&mut net, &train, &eval, &config, &mut |m| {
            let _ = writeln!(
                err,
                "seed {seed} epoch {:>3}  lr {:.5}  loss {:.4}  train {:.3}  eval {:.3}",
                m.epoch, m.lr, m.train_loss, m.train_acc, m.eval_acc
            );
        })?;
        finals.push(report.final_eval_acc());
        match &a.out_dir {
            Some(d) => {
                report.write_csv(fs::File::create(d.join(format!("metrics_seed{seed}.csv")))?)?;
                let meta = RunMeta {
                    seed,
                    network: desc.clone(),
                };
                Checkpoint::from_network(&net, meta.to_toml()).save(d.join(format!("seed{seed}.ckpt")))?;
                let sample = sample_images(&eval, 256);
                for p in &probes {
                    let dump = dump_histogram(&mut net, p, &sample)?;
                    let file = format!("hist_seed{seed}_{}_{}.csv", p.source, p.location.replace('/', "_"));
                    dump.write_csv(fs::File::create(d.join(file))?)?;
                }
            }
            None => write!(out, "{}", report.to_csv())?,
        }
        writeln!(out, "seed {seed}: final eval accuracy {:.4}", report.final_eval_acc())?;
    }
    let (mean, std) = mean_std(&finals);
    writeln!(out, "eval accuracy over {} seed(s): {mean:.4} ± {std:.4}", finals.len())?;
    Ok(())
}

fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let meta = RunMeta::parse(&ckpt.meta)?;
    let spec = meta.network.build()?;
    let mut net = spec.instantiate(meta.seed)?;
    ckpt.apply_to(&mut net)?;
    let shape = net.input_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let sample = Tensor4::from_fn(
        [a.samples.max(1), shape.channels, shape.height, shape.width],
        |_, _, _, _| StandardNormal.sample(&mut rng),
    );
    let mut probe = Probe::new(a.source, a.location.clone());
    if a.skip_dc {
        probe = probe.skipping_dc();
    }
    let dump = dump_histogram(&mut net, &probe, &sample)?;
    writeln!(
        err,
        "{spec} (seed {}): {} values from {} at '{}'",
        meta.seed,
        dump.total(),
        a.source,
        a.location
    )?;
    match &a.out {
        Some(p) => dump.write_csv(fs::File::create(p)?)?,
        None => dump.write_csv(out)?,
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let opts = VerifyOptions {
        targets: a.targets.clone().map_or(TargetSource::Bundled, TargetSource::File),
        perturb_hadamard: a.perturb_hadamard,
        seed: a.seed,
    };
    let report = run_verify(&opts);
    writeln!(out, "{report}")?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "{} check(s) failed",
            report.count(Verdict::Fail)
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("ctpc").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn transform_examples() {
        assert_eq!(
            run_args(&["transform", "--kind", "dwht", "--fast", "--in", "1,2,3,4"]).1,
            "10,-2,-4,0\n"
        );
        assert_eq!(
            run_args(&["transform", "--kind", "dwht", "--in", "1,0,0,0"]).1,
            "1,1,1,1\n"
        );
        let (code, _, err) = run_args(&["transform", "--kind", "dwht", "--in", "1,2,3", "--fast"]);
        assert_eq!(code, EXIT_FAILURE);
        assert!(err.contains("not a power of two"), "{err}");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["transform", "--kind", "dwht", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn histogram_flag_parsing() {
        let p = parse_histogram_flag("dw:block7").unwrap();
        assert_eq!(
            (p.source, p.location.as_str()),
            (ProbeSource::DepthwiseWeights, "block7")
        );
        assert_eq!(parse_histogram_flag("transform_activation").unwrap().location, "all");
        assert!(parse_histogram_flag("nope:all").is_err());
    }
}
