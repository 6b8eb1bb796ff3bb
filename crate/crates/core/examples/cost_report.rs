//! Costs the reference networks and checks them against the bundled targets.
//!
//! ```sh
//! cargo run --release --example cost_report
//! cargo run --release --example cost_report -- --layers   # per-layer table for DWHT-6-H
//! ```

use ctpc::arch::NetDescription;
use ctpc::cost::{comparison_header, count_flops, TargetFile, Verdict};

fn main() -> ctpc::Result<()> {
    let targets = TargetFile::bundled();

    if std::env::args().any(|a| a == "--layers") {
        let net = NetDescription::parse("family = \"mobilenet_v1\"\nscheme = \"DWHT-6-H\"")?.build()?;
        println!("{}\n", count_flops(&net, (32, 32))?);
    }

    println!("{}", comparison_header());
    let mut failed = 0;
    for c in targets.evaluate()? {
        println!("{c}");
        failed += (c.verdict == Verdict::Fail) as usize;
    }
    println!("\n{failed} comparison(s) outside tolerance");
    Ok(())
}
