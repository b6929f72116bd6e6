//! Decentralized fictitious play in near-potential games.
//!
//! Agents repeatedly best-respond to local estimates of the other agents'
//! empirical action frequencies. The estimates are averaged with neighbors
//! over a time-varying communication network. The crate provides:
//!
//! - [`game`]: dense normal-form games, mixed strategies, maximum pairwise
//!   difference, potential certificates, regret and pure equilibria.
//! - [`netcomm`]: graph schedules, connectivity and bounded-interval checks,
//!   row-stochastic averaging weights.
//! - [`dfp`]: the learning loop itself and its trajectory record.
//! - [`games`]: target assignment with noisy target estimates, perturbed
//!   potential games and a few small named games.
//! - [`analysis`]: convergence metrics and numerical checks of the
//!   convergence conditions (rates, potential increments, excursions, `q(α)`,
//!   closeness inequalities, basin tracking).
//! - [`experiment`]: configuration, seeded replications, CSV and SVG output.

pub mod analysis;
pub mod dfp;
pub mod error;
pub mod experiment;
pub mod game;
pub mod games;
pub mod netcomm;
pub mod seed;

pub use error::{Error, Result};
