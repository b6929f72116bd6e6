//! Belief consensus over ring, star and complete graphs on the same game.

use nearpot_dfp::analysis::{check_step_sizes, fit_consensus_rate};
use nearpot_dfp::dfp::{run, Communication, RunConfig};
use nearpot_dfp::games::random_potential_game;
use nearpot_dfp::netcomm::{build_weights, GraphSchedule, WeightRule};

fn main() -> nearpot_dfp::Result<()> {
    let n = 6;
    let (game, _) = random_potential_game(n, 3, 5)?;
    let horizon = 400;
    let graphs = [
        ("ring", GraphSchedule::ring(n)),
        ("star", GraphSchedule::star(n, 0)?),
        ("complete", GraphSchedule::complete(n)),
    ];
    for (name, schedule) in graphs {
        let weights = build_weights(&schedule, WeightRule::SelfWeight { self_weight: 0.75 }, horizon)?;
        println!("{name}: eta={:.4}", weights.eta());
        let traj = run(&game, &Communication::Network(weights), &RunConfig { horizon, ..Default::default() })?;
        let errors = traj.belief_errors_max();
        let fit = fit_consensus_rate(&errors, 10)?;
        let steps = check_step_sizes(&traj);
        println!(
            "  error t=50 {:.4}, t=400 {:.5}; C={:.3}, bound holds: {}; step-size ratio max {:.3}",
            errors[49], errors[horizon - 1], fit.c, fit.holds, steps.max_ratio
        );
    }
    Ok(())
}
