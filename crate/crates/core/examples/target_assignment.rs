//! One target-assignment run: sampled geometry, noisy target signals and
//! decentralized play over a ring.

use nearpot_dfp::analysis::{fig1_metrics, EquilibriumAtlas};
use nearpot_dfp::dfp::{run, Communication, RunConfig};
use nearpot_dfp::games::{estimate_targets, is_one_to_one, Geometry, GeometrySpec, SignalModel, StagedGame};
use nearpot_dfp::netcomm::{build_weights, GraphSchedule, WeightRule};

fn main() -> nearpot_dfp::Result<()> {
    let (n, horizon) = (6, 300);
    let geometry = Geometry::sample(n, n, &GeometrySpec::default(), 1)?;
    let signals = SignalModel { noise_std: 0.1_f64.sqrt(), signal_cutoff: 10, seed: 2 };
    let estimates = estimate_targets(&signals, &geometry, horizon)?;
    let game = StagedGame::from_estimates(&estimates)?;

    let weights = build_weights(&GraphSchedule::ring(n), WeightRule::SelfWeight { self_weight: 0.75 }, horizon)?;
    let traj = run(&game, &Communication::Network(weights), &RunConfig { horizon, ..Default::default() })?;
    let metrics = fig1_metrics(&traj, &EquilibriumAtlas::one_to_one(n)?)?;
    for t in [1, 10, 50, 100, 200, 300] {
        println!(
            "t={t:>3} ne distance {:.4} estimation error {:.4}",
            metrics.avg_ne_distance[t - 1], metrics.avg_belief_error[t - 1]
        );
    }
    let last = &traj.steps[horizon - 1].actions;
    println!("final targets {last:?}, one-to-one: {}", is_one_to_one(last));
    Ok(())
}
