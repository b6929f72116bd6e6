//! Centralized fictitious play on a 3-action coordination game, started from a
//! miscoordinated profile.

use nearpot_dfp::analysis::EquilibriumAtlas;
use nearpot_dfp::dfp::{run, Communication, InitialRule, RunConfig};
use nearpot_dfp::game::check_potential;
use nearpot_dfp::games::identity_coordination;

fn main() -> nearpot_dfp::Result<()> {
    let game = identity_coordination(3);
    let potential = check_potential(&game, 1e-9).potential;
    let cfg = RunConfig {
        horizon: 200,
        initial: InitialRule::Pure { profile: vec![0, 1] },
        reference_potential: potential,
        ..Default::default()
    };
    let traj = run(&game, &Communication::Centralized, &cfg)?;
    for s in traj.steps.iter().filter(|s| s.t <= 6 || s.t % 50 == 0) {
        println!(
            "t={:>3} actions={:?} regret={:.4} potential={:.4}",
            s.t,
            s.actions,
            s.max_regret,
            s.potential.unwrap_or(f64::NAN)
        );
    }
    let atlas = EquilibriumAtlas::from_game(&game)?;
    let last = traj.steps.last().expect("nonempty run");
    let (ne, d) = atlas.nearest(last.frequencies.strategies());
    println!("nearest equilibrium {ne:?} at distance {d:.4}");
    Ok(())
}
