//! Configured, seeded experiments and their artifacts.
//!
//! Four entry points mirror the `dfp` binary's commands: [`simulate`],
//! [`verify_game`], [`reproduce_fig1`] and [`analyze`].

pub mod chart;
pub mod config;
pub mod output;
pub mod runner;

use std::path::Path;

use serde::Serialize;

use crate::analysis::{verify_closeness_with, QSampler, TheoryReport};
use crate::error::Result;
use crate::game::{check_potential, enumerate_pure_ne, NormalFormGame, DEFAULT_TOL};

pub use config::{ExperimentConfig, NetworkConfig, NetworkKind, Scenario};
pub use output::{analyze_dir as analyze, StoredAnalysis};
pub use runner::{run_experiment, ExperimentResult, ReferencedGame, RunSummary};

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub networks: Option<Vec<NetworkKind>>,
    pub strict_assumptions: bool,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.replication.master_seed = s;
        }
        if let Some(r) = o.runs {
            self.replication.n_runs = r;
        }
        if let Some(kinds) = &o.networks {
            self.networks = kinds.iter().map(|&k| NetworkConfig::of_kind(k)).collect();
            self.dfp.centralized = false;
        }
        self.dfp.strict_assumptions |= o.strict_assumptions;
        self.validate()
    }
}

/// Runs `config` and writes every artifact under `out`.
pub fn simulate(config: &ExperimentConfig, out: &Path) -> Result<ExperimentResult> {
    let result = run_experiment(config)?;
    output::write_outputs(&result, out)?;
    Ok(result)
}

/// The target-assignment preset on a ring and a star, written under `out`.
pub fn reproduce_fig1(out: &Path) -> Result<ExperimentResult> {
    simulate(&ExperimentConfig::fig1_preset(), out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub alpha_bar: f64,
    pub eps_bar: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { alpha_bar: 0.1, eps_bar: 0.01, samples: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub report: TheoryReport,
    pub reference_equilibria: Option<u128>,
}

/// Potential certificate, pure equilibria, distance to the reference
/// potential game and the closeness conditions with a sampled `q` on the
/// reference game.
pub fn verify_game(game: &NormalFormGame, reference: Option<&NormalFormGame>, opts: &VerifyOptions) -> Result<VerifyOutcome> {
    let mut report = TheoryReport::default();
    let cert = check_potential(game, DEFAULT_TOL);
    report.is_potential = Some(cert.is_potential);
    report.potential_residual = Some(cert.max_residual);
    report.flag("potential game", Some(cert.is_potential), format!("max residual {:.3e}", cert.max_residual));
    let own = enumerate_pure_ne(game)?;
    report.n_equilibria = Some(own.len() as u128);
    report.flag("pure equilibrium exists", Some(!own.is_empty()), format!("{} pure equilibria", own.len()));

    let refd = ReferencedGame::new(game.clone(), reference.cloned())?;
    report.notes.extend(refd.notes.iter().cloned());
    report.delta = Some(refd.measured_delta);
    let mut reference_equilibria = None;
    match &refd.atlas {
        Some(atlas) => {
            reference_equilibria = Some(atlas.count());
            report.d_star = atlas.d_star();
            let sampler = QSampler::draw(&refd.reference, atlas, opts.samples, opts.seed)?;
            let closeness =
                verify_closeness_with(game, &refd.potential, atlas, &sampler, opts.alpha_bar, opts.eps_bar)?;
            report.flag(
                "closeness conditions (sampled q)",
                Some(closeness.all_passed()),
                format!("{} checks", closeness.checks.len()),
            );
            if let Some(dis) = sampler.disjointness(opts.alpha_bar) {
                report.flag(
                    "approximate-equilibrium sets disjoint (sampled)",
                    Some(dis.holds()),
                    format!("{} of {} kept samples near exactly one equilibrium", dis.single_owner, dis.kept),
                );
            }
            let grid: Vec<f64> = (0..=10).map(|i| opts.alpha_bar * i as f64 / 5.0).collect();
            report.q_curve = sampler.curve(&grid);
            report.closeness = Some(closeness);
        }
        None => report.notes.push("reference game has no pure equilibrium".into()),
    }
    if reference.is_some() || !cert.is_potential {
        if let Some(m) = reference_equilibria {
            report.notes.push(format!("reference game has {m} pure equilibria"));
        }
    }
    Ok(VerifyOutcome { report, reference_equilibria })
}

/// [`verify_game`] on JSON game files.
pub fn verify_game_files(game: &Path, reference: Option<&Path>, opts: &VerifyOptions) -> Result<VerifyOutcome> {
    let g = NormalFormGame::read(game)?;
    let r = reference.map(NormalFormGame::read).transpose()?;
    verify_game(&g, r.as_ref(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{identity_coordination, matching_pennies, perturb_potential_game};

    #[test]
    fn verify_identity_coordination() {
        let out = verify_game(&identity_coordination(2), None, &VerifyOptions::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.is_potential, Some(true));
        assert_eq!(r.n_equilibria, Some(2));
        assert_eq!(r.d_star, Some(2.0));
        let text = r.to_string();
        assert!(text.contains("potential: yes"));
        assert!(text.contains("pure NE: 2"));
    }

    #[test]
    fn verify_matching_pennies() {
        let out = verify_game(&matching_pennies(), None, &VerifyOptions::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.is_potential, Some(false));
        assert_eq!(r.n_equilibria, Some(0));
        let flag = r.assumptions.iter().find(|a| a.name == "pure equilibrium exists").unwrap();
        assert_eq!(flag.holds, Some(false));
        assert!(r.to_string().contains("potential: no"));
    }

    #[test]
    fn verify_perturbed_reports_small_delta() {
        let base = identity_coordination(2);
        let p = perturb_potential_game(&base, 0.05, 3).unwrap();
        let out = verify_game(&p.game, Some(&base), &VerifyOptions::default()).unwrap();
        assert!(out.report.delta.unwrap() <= 0.05);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ExperimentConfig::fig1_preset();
        cfg.apply(&Overrides {
            seed: Some(3),
            runs: Some(2),
            networks: Some(vec![NetworkKind::Complete]),
            strict_assumptions: true,
        })
        .unwrap();
        assert_eq!(cfg.replication.master_seed, 3);
        assert_eq!(cfg.replication.n_runs, 2);
        assert_eq!(cfg.variants().len(), 1);
        assert!(cfg.dfp.strict_assumptions);
        assert!(cfg.apply(&Overrides { runs: Some(0), ..Default::default() }).is_err());
    }
}
