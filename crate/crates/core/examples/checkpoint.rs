//! Saves a network to the binary checkpoint format, reloads it into a fresh
//! network and confirms the round trip is bit-exact.
//!
//! ```sh
//! cargo run --example checkpoint
//! ```

use ctpc::arch::NetDescription;
use ctpc::nn::checkpoint::Checkpoint;
use ctpc::nn::Mode;
use ctpc::Tensor4;

fn main() -> ctpc::Result<()> {
    let desc = NetDescription::parse("family = \"tiny\"\nvariant = \"rcpc\"\nnum_classes = 4\ninput_size = 8")?;
    let spec = desc.build()?;
    let mut a = spec.instantiate(11)?;
    let x = Tensor4::from_fn([2, 3, 8, 8], |b, c, h, w| ((b + c * h + w) % 7) as f64 - 3.0);
    // one train-mode pass moves the batch norm running statistics
    a.forward(&x, Mode::Train)?;

    let path = std::env::temp_dir().join("ctpc_example.ckpt");
    let ckpt = Checkpoint::from_network(&a, desc.to_toml());
    ckpt.save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    println!(
        "{} entries, {} bytes, metadata:\n{}",
        loaded.entries.len(),
        std::fs::metadata(&path)?.len(),
        loaded.meta
    );

    let mut b = NetDescription::parse(&loaded.meta)?.build()?.instantiate(99)?;
    loaded.apply_to(&mut b)?;
    let ya = a.forward(&x, Mode::Eval)?;
    let yb = b.forward(&x, Mode::Eval)?;
    let identical = ya.data().iter().zip(yb.data()).all(|(p, q)| p.to_bits() == q.to_bits());
    println!("eval outputs bit-identical after reload: {identical}");
    std::fs::remove_file(&path)?;
    Ok(())
}
