//! DCT-II pointwise layer: fast recursion, dense kernel and the adjoint.
//!
//! ```sh
//! cargo run --example dct_pointwise
//! ```

use ctpc::transforms::{dct_apply, dct_kernel, transform_adjoint, TransformSpec};
use ctpc::Tensor4;

fn main() -> ctpc::Result<()> {
    let k = dct_kernel(4)?;
    println!("unnormalized DCT-II kernel, N = 4:");
    for m in 0..4 {
        let row: Vec<String> = k.row(m).iter().map(|v| format!("{v:>7.4}")).collect();
        println!("  {}", row.join(" "));
    }

    let spec = TransformSpec::dct(8, 8)?;
    let x = Tensor4::from_fn([1, 8, 2, 2], |_, c, h, w| (c as f64 - 3.5) + 0.1 * (h + w) as f64);
    let fast = dct_apply(&x, &spec)?;
    let dense = dct_apply(&x, &spec.with_fast(false)?)?;
    println!("fast vs dense max |diff| = {:.2e}", fast.max_abs_diff(&dense));

    let g = Tensor4::from_fn([1, 8, 2, 2], |_, c, h, w| ((c * 3 + h + 2 * w) % 5) as f64 - 2.0);
    let lhs = fast.dot(&g);
    let rhs = x.dot(&transform_adjoint(&g, &spec)?);
    println!("<Cx, g> = {lhs:.6}, <x, C'g> = {rhs:.6}");

    let cost = spec.op_count()?;
    let naive = spec.with_fast(false)?.op_count()?;
    println!("per location: fast {cost}, dense {naive}");
    Ok(())
}
