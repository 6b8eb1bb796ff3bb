//! Fast Walsh-Hadamard pointwise layer versus the dense Hadamard multiply.
//!
//! ```sh
//! cargo run --example fast_dwht
//! ```

use ctpc::transforms::{dwht_fast, dwht_naive, hadamard_matrix, TransformSpec};
use ctpc::Tensor4;

fn main() -> ctpc::Result<()> {
    let h = hadamard_matrix(3)?;
    println!("H(8):");
    for m in 0..h.size() {
        let row: Vec<String> = h.row(m).iter().map(|v| format!("{v:>2}")).collect();
        println!("  {}", row.join(" "));
    }

    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let dense = dwht_naive(&x, &TransformSpec::dwht(8, 8)?)?;
    let fast = dwht_fast(&Tensor4::from_channel_vector(&x)?, 8)?;
    println!("x          = {x:?}");
    println!("H x dense  = {dense:?}");
    println!("H x fast   = {:?}", fast.data());

    // N < M pads with zeros, N > M keeps the leading outputs
    let up = dwht_naive(&x[..3], &TransformSpec::dwht(3, 4)?)?;
    let down = dwht_naive(&x, &TransformSpec::dwht(8, 2)?)?;
    println!("3 -> 4 channels: {up:?}");
    println!("8 -> 2 channels: {down:?}");

    // one butterfly over a whole feature map
    let fmap = Tensor4::from_fn([1, 16, 4, 4], |_, c, h, w| (c + h * w) as f64);
    let y = dwht_fast(&fmap, 32)?;
    println!("feature map {:?} -> {:?}", fmap.dims(), y.dims());
    Ok(())
}
