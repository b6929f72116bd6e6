//! Potential certificates, the maximum pairwise difference between games and
//! the least-squares potential fit of a game that is not exactly potential.

use nearpot_dfp::game::{check_potential, enumerate_pure_ne, mpd, nearest_potential_lsq};
use nearpot_dfp::games::{identity_coordination, matching_pennies, perturb_potential_game};

fn main() -> nearpot_dfp::Result<()> {
    let base = identity_coordination(3);
    let cert = check_potential(&base, 1e-9);
    println!("coordination: potential={} residual={:.2e}", cert.is_potential, cert.max_residual);

    let perturbed = perturb_potential_game(&base, 0.05, 1)?;
    let cert = check_potential(&perturbed.game, 1e-9);
    println!(
        "perturbed: potential={} mpd to base={:.4} (requested {})",
        cert.is_potential,
        mpd(&perturbed.game, &base)?,
        perturbed.delta
    );
    let fit = nearest_potential_lsq(&perturbed.game)?;
    println!("lsq fit: mpd={:.4}, equilibria of fit {:?}", fit.delta, enumerate_pure_ne(&fit.game)?);

    let pennies = matching_pennies();
    let fit = nearest_potential_lsq(&pennies)?;
    println!(
        "matching pennies: potential={} pure NE={} lsq mpd={:.4}",
        check_potential(&pennies, 1e-9).is_potential,
        enumerate_pure_ne(&pennies)?.len(),
        fit.delta
    );
    Ok(())
}
