//! Activation histograms after a DWHT pointwise layer and depthwise weight
//! histograms, on zero-mean random input. Writes CSVs to a directory.
//!
//! ```sh
//! cargo run --release --example histograms -- out_dir
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ctpc::arch::NetDescription;
use ctpc::train::{dump_histogram, probe_values, sign_fractions, Probe, ProbeSource};
use ctpc::Tensor4;

fn main() -> ctpc::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "histograms".into()));
    std::fs::create_dir_all(&dir)?;
    let spec = NetDescription::parse("family = \"mobilenet_v1\"\nwidth = 0.5\nscheme = \"DWHT-6-H\"")?.build()?;
    let mut net = spec.instantiate(0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor4::from_fn([4, 3, 32, 32], |_, _, _, _| StandardNormal.sample(&mut rng));

    let act = Probe::new(ProbeSource::ActivationAfterTransformPC, "all").skipping_dc();
    let values = probe_values(&mut net, &act, &x)?;
    let (pos, neg) = sign_fractions(&values);
    println!("{spec}");
    println!(
        "transform PC outputs (channels m >= 1): {} values, {:.1}% positive, {:.1}% negative",
        values.len(),
        100.0 * pos,
        100.0 * neg
    );

    for (probe, file) in [
        (act, "activation_all.csv"),
        (Probe::new(ProbeSource::DepthwiseWeights, "block12"), "dw_block12.csv"),
        (Probe::new(ProbeSource::DepthwiseWeights, "all"), "dw_all.csv"),
    ] {
        let h = dump_histogram(&mut net, &probe, &x)?;
        h.write_csv(std::fs::File::create(dir.join(file))?)?;
        let peak = h
            .counts
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| **c)
            .map(|(i, _)| i)
            .unwrap_or(0);
        println!(
            "{file}: {} samples over [{:.3}, {:.3}], fullest bin {peak}",
            h.total(),
            h.edges[0],
            h.edges[h.edges.len() - 1]
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
