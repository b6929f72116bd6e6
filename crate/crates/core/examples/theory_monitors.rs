//! Potential-increment monitor, excursion detection and basin tracking on a
//! perturbed potential game.

use nearpot_dfp::analysis::{basin_tracker_after, detect_excursions_in, lemma2_monitor, EquilibriumAtlas, Lemma2Params};
use nearpot_dfp::dfp::{run, Communication, InitialRule, RunConfig};
use nearpot_dfp::game::check_potential;
use nearpot_dfp::games::{identity_coordination, perturb_potential_game};

fn main() -> nearpot_dfp::Result<()> {
    let base = identity_coordination(3);
    let potential = check_potential(&base, 1e-9).potential.expect("coordination is potential");
    let delta = 0.02;
    let perturbed = perturb_potential_game(&base, delta, 3)?;
    let cfg = RunConfig {
        horizon: 1000,
        initial: InitialRule::Pure { profile: vec![0, 1] },
        reference_potential: Some(potential.clone()),
        ..Default::default()
    };
    let traj = run(&perturbed.game, &Communication::Centralized, &cfg)?;

    let eps = 2.0 * 2.0 * perturbed.achieved_mpd + 0.05;
    let rep = lemma2_monitor(&traj, &potential, &Lemma2Params { delta: perturbed.achieved_mpd, eps, t_start: 5, fit_until: None })?;
    println!(
        "increment monitor: {} qualifying steps, C={:.4}, violations {} ({:.1}%)",
        rep.qualifying.len(),
        rep.fitted_c,
        rep.violations.len(),
        100.0 * rep.violation_fraction
    );

    for r in detect_excursions_in(&traj, Some(&potential), 0.01, 0.02, perturbed.achieved_mpd)? {
        println!(
            "excursion t1={} t2={} t2'={} t1'={} gain {:.4} vs bound {:.4}",
            r.t1,
            r.t2,
            r.t2p,
            r.t1p,
            r.potential_gain.unwrap_or(f64::NAN),
            r.bound
        );
    }

    let atlas = EquilibriumAtlas::from_game(&base)?;
    let basin = basin_tracker_after(&traj, &atlas, 2.0 * perturbed.achieved_mpd + 0.05, 100)?;
    println!("basin verdict {:?}, switches after entry {}", basin.verdict, basin.switches_after_last_entry);
    Ok(())
}
