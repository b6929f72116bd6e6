//! Loads a TOML experiment, overrides seed and run count, simulates and
//! re-analyzes the written directory.
//! Usage: `cargo run --example simulate_config [CONFIG] [OUT_DIR]`

use std::path::PathBuf;

use nearpot_dfp::experiment::{self, ExperimentConfig, Overrides};

fn main() -> nearpot_dfp::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/coordination.toml"),
        PathBuf::from,
    );
    let out = args.next().map_or_else(|| PathBuf::from("out/simulate"), PathBuf::from);
    let mut cfg = ExperimentConfig::read(&config)?;
    cfg.apply(&Overrides { seed: Some(42), runs: Some(4), ..Default::default() })?;
    let result = experiment::simulate(&cfg, &out)?;
    for v in &result.variants {
        let settled = v.runs.iter().filter(|r| r.summary.basin_verdict.is_some()).count();
        println!("{}: {} runs, {settled} settled near one equilibrium", v.name, v.runs.len());
    }
    print!("{}", experiment::analyze(&out)?);
    Ok(())
}
