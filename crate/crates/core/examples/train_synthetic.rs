//! Trains the tiny network on the synthetic channel-pattern task with
//! learnable, CTPC_ReLU (c) and CTPC (d) pointwise layers over three seeds.
//!
//! Defaults are the acceptance settings; positional arguments override them.
//!
//! ```sh
//! cargo run --release --example train_synthetic -- [epochs] [noise] [train_samples]
//! ```

use std::time::Instant;

use ctpc::arch::BlockVariant;
use ctpc::train::DeskExperiment;
use ctpc::transforms::TransformKind;

fn main() -> ctpc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut exp = DeskExperiment::default();
    if let Some(v) = args.first().and_then(|s| s.parse().ok()) {
        exp.config.epochs = v;
    }
    if let Some(v) = args.get(1).and_then(|s| s.parse().ok()) {
        exp.task.noise = v;
    }
    if let Some(v) = args.get(2).and_then(|s| s.parse().ok()) {
        exp.task.train_samples = v;
    }
    let (train, eval) = exp.data()?;
    println!(
        "{} classes, {}x{}x{}, noise {}, {} train / {} eval, {} epochs, seeds {:?}",
        exp.task.classes,
        exp.task.channels,
        exp.task.size,
        exp.task.size,
        exp.task.noise,
        train.len(),
        eval.len(),
        exp.config.epochs,
        exp.seeds
    );
    for variant in [
        BlockVariant::baseline(),
        BlockVariant::ctpc_relu(TransformKind::Dwht),
        BlockVariant::ctpc(TransformKind::Dwht),
    ] {
        let t = Instant::now();
        let s = exp.run(variant, &train, &eval)?;
        let finals: Vec<String> = s.reports.iter().map(|r| format!("{:.3}", r.final_eval_acc())).collect();
        println!(
            "{:<16} eval acc {:.3} ± {:.3}  [{}]  {:.1}s",
            variant.to_string(),
            s.mean,
            s.std,
            finals.join(", "),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
