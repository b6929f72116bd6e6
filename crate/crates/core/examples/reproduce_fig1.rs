//! Runs the target-assignment preset (ring and star) and writes CSVs and charts.
//! Usage: `cargo run --release --example reproduce_fig1 [OUT_DIR]`

use std::path::PathBuf;

fn main() -> nearpot_dfp::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/fig1"), PathBuf::from);
    let result = nearpot_dfp::experiment::reproduce_fig1(&out)?;
    for v in &result.variants {
        let one_to_one = v.runs.iter().filter(|r| r.summary.one_to_one == Some(true)).count();
        let err = &v.aggregate.avg_belief_error;
        println!(
            "{}: one-to-one {one_to_one}/{}, estimation error t=200 {:.4}, final {:.4}",
            v.name,
            v.runs.len(),
            err[199.min(err.len() - 1)],
            err[err.len() - 1]
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
