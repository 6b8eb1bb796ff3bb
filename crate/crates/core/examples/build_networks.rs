//! Builds the ShuffleNet-V2 and MobileNet-V1 variants from network
//! descriptions and prints their block layouts and sizes.
//!
//! ```sh
//! cargo run --example build_networks
//! ```

use ctpc::arch::NetDescription;
use ctpc::cost::count_params;

const DESCRIPTIONS: &[&str] = &[
    r#"family = "shufflenet_v2"
width = 1.1"#,
    r#"family = "shufflenet_v2"
width = 1.1
variant = "rcpc""#,
    r#"family = "shufflenet_v2"
width = 1.1
variant = "ctpc_relu"
transform = "dwht""#,
    r#"family = "shufflenet_v2"
width = 1.1
variant = "ctpc"
transform = "dct""#,
    r#"family = "mobilenet_v1"
scheme = "DWHT-6-H""#,
    r#"family = "mobilenet_v1"
scheme = "DCT-3-M-Rear""#,
];

fn main() -> ctpc::Result<()> {
    for text in DESCRIPTIONS {
        let desc = NetDescription::parse(text)?;
        let net = desc.build()?;
        let p = count_params(&net)?;
        println!("{net}");
        println!("  learnable {} fixed {}", p.learnable, p.fixed);
        let substituted: Vec<&str> = net
            .blocks
            .iter()
            .filter(|b| b.variant.transform().is_some())
            .map(|b| b.name.as_str())
            .collect();
        if !substituted.is_empty() {
            println!("  transform blocks: {}", substituted.join(" "));
        }
    }

    // the layer-level view of one unit
    let net = NetDescription::parse("family = \"tiny\"\nvariant = \"ctpc\"\ntransform = \"dwht\"")?.build()?;
    println!("\n{net}");
    for (name, kind, shape) in ctpc::nn::spec::expanded_listing(&net.to_nodes()?, net.input_shape())? {
        println!("  {name:<14} {kind:<32} {shape}");
    }
    Ok(())
}
