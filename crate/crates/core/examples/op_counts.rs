//! Multiplications per spatial location of an N -> N pointwise layer, as CSV:
//! learnable PC grows as N², fast DCT as N·log2 N, fast DWHT stays at zero.
//!
//! ```sh
//! cargo run --example op_counts > op_counts.csv
//! ```

use ctpc::transforms::{count_ops, dwht_fast_vec, op_count, Counted, PcEvaluation};

fn main() -> ctpc::Result<()> {
    println!("n,naive_pc_mult,fast_dct_mult,fast_dwht_mult,naive_pc_flops,fast_dct_flops,fast_dwht_flops,dwht_counted_add_sub");
    for d in 0..=10u32 {
        let n = 1usize << d;
        let pc = op_count(PcEvaluation::NaivePC, n, n)?;
        let dct = op_count(PcEvaluation::FastDCT, n, n)?;
        let dwht = op_count(PcEvaluation::FastDWHT, n, n)?;
        // instrumented run of the actual butterfly
        let x: Vec<Counted> = (0..n).map(|i| Counted(i as f64)).collect();
        let (_, counted) = count_ops(|| dwht_fast_vec(&x, n));
        assert_eq!(counted, dwht);
        println!(
            "{n},{},{},{},{},{},{},{}",
            pc.multiplications,
            dct.multiplications,
            dwht.multiplications,
            pc.total(),
            dct.total(),
            dwht.total(),
            counted.add_sub()
        );
    }
    Ok(())
}
