//! Sampled q-function and the closeness conditions for a game close to a
//! coordination game.

use nearpot_dfp::analysis::{EquilibriumAtlas, QSampler};
use nearpot_dfp::experiment::{verify_game, VerifyOptions};
use nearpot_dfp::games::{corner_coordination, identity_coordination, perturb_potential_game};

fn main() -> nearpot_dfp::Result<()> {
    let reference = identity_coordination(3);
    let atlas = EquilibriumAtlas::from_game(&reference)?;
    let sampler = QSampler::draw(&reference, &atlas, 2000, 0)?;
    for (alpha, q) in sampler.curve(&[0.0, 0.01, 0.05, 0.1, 0.2]) {
        println!("q({alpha:.2}) >= {q:.4}");
    }

    let game = perturb_potential_game(&reference, 0.01, 4)?.game;
    let out = verify_game(&game, Some(&reference), &VerifyOptions::default())?;
    print!("{}", out.report);

    println!("--- corner coordination");
    let out = verify_game(&corner_coordination(), None, &VerifyOptions { alpha_bar: 0.05, eps_bar: 1e-4, ..Default::default() })?;
    print!("{}", out.report);
    Ok(())
}
