//! Seeded replications of a configured experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    self, AssumptionFlag, BasinReport, ConsensusFit, EquilibriumAtlas, ExcursionRecord, Lemma2Params,
    Lemma2Report, StepSizeCheck, TheoryReport, ViolationCount,
};
use crate::dfp::{self, Communication, OracleSource, RunConfig, Trajectory};
use crate::error::{Error, Result};
use crate::game::{
    check_potential, mpd, nearest_potential_lsq, profile_count, NormalFormGame, PotentialFunction, PureProfile,
    DEFAULT_TOL, DENSE_LIMIT,
};
use crate::games::{
    estimate_targets, is_one_to_one, perturb_potential_game, random_potential_game, Geometry, SignalModel,
    StagedGame, TargetAssignmentGame,
};
use crate::netcomm::{audit_weights, build_weights, check_bounded_interval, check_connectivity};
use crate::seed::{stream_seed, Stream};

use super::config::{ExperimentConfig, NetworkConfig, Scenario, TargetScenario};

/// A game with a potential-game reference `Γ̂` and its equilibria.
#[derive(Debug, Clone)]
pub struct ReferencedGame {
    pub game: NormalFormGame,
    pub reference: NormalFormGame,
    pub potential: PotentialFunction,
    /// `mpd(game, reference)`.
    pub measured_delta: f64,
    /// Pure equilibria of the reference; `None` when it has none.
    pub atlas: Option<EquilibriumAtlas>,
    pub notes: Vec<String>,
}

impl ReferencedGame {
    /// Uses `reference` when given (it must be a potential game), else the game
    /// itself when it is one, else its least-squares potential fit.
    pub fn new(game: NormalFormGame, reference: Option<NormalFormGame>) -> Result<Self> {
        let mut notes = Vec::new();
        let (reference, potential) = match reference {
            Some(r) => {
                let cert = check_potential(&r, DEFAULT_TOL);
                let p = cert.potential.ok_or(Error::NotPotential(cert.max_residual))?;
                (r, p)
            }
            None => {
                let cert = check_potential(&game, DEFAULT_TOL);
                match cert.potential {
                    Some(p) => (game.clone(), p),
                    None => {
                        let lsq = nearest_potential_lsq(&game)?;
                        notes.push(format!(
                            "no reference given and the game is not potential; using the least-squares fit (MPD {:.6})",
                            lsq.delta
                        ));
                        let p = lsq.certificate.potential.clone().ok_or(Error::NotPotential(lsq.certificate.max_residual))?;
                        (lsq.game, p)
                    }
                }
            }
        };
        let measured_delta = mpd(&game, &reference)?;
        let atlas = match EquilibriumAtlas::from_game(&reference) {
            Ok(a) => Some(a),
            Err(Error::Assumption(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { game, reference, potential, measured_delta, atlas, notes })
    }
}

/// Per-run outcome in one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub network: String,
    pub final_profile: PureProfile,
    /// Target assignment only: no two agents share a target over the final
    /// `tail` steps.
    pub one_to_one: Option<bool>,
    pub final_avg_ne_distance: Option<f64>,
    pub basin_verdict: Option<PureProfile>,
    pub basin_switches_after_entry: Option<usize>,
    pub step_size_violations: usize,
    pub consensus_c: Option<f64>,
    pub consensus_holds: Option<bool>,
    pub lemma2_qualifying: Option<usize>,
    pub lemma2_violations: Option<usize>,
    pub excursion_failures: Option<usize>,
    pub assumptions: Vec<AssumptionFlag>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub avg_ne_distance: Option<Vec<f64>>,
    pub step_sizes: StepSizeCheck,
    pub consensus: Option<ConsensusFit>,
    pub lemma2: Option<Lemma2Report>,
    pub excursions: Vec<ExcursionRecord>,
    pub basin: Option<BasinReport>,
    pub theory: TheoryReport,
}

/// Per-step means across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub avg_ne_distance: Option<Vec<f64>>,
    pub avg_belief_error: Vec<f64>,
    pub max_belief_error: Vec<f64>,
    pub max_regret: Vec<f64>,
}

fn mean_columns(columns: &[Vec<f64>]) -> Vec<f64> {
    let len = columns.first().map_or(0, Vec::len);
    (0..len)
        .map(|t| columns.iter().map(|c| c[t]).sum::<f64>() / columns.len() as f64)
        .collect()
}

pub fn aggregate(runs: &[RunOutput]) -> Aggregate {
    let ne: Option<Vec<Vec<f64>>> = runs.iter().map(|r| r.avg_ne_distance.clone()).collect();
    Aggregate {
        runs: runs.len(),
        avg_ne_distance: ne.map(|c| mean_columns(&c)),
        avg_belief_error: mean_columns(&runs.iter().map(|r| r.trajectory.belief_errors_avg()).collect::<Vec<_>>()),
        max_belief_error: mean_columns(&runs.iter().map(|r| r.trajectory.belief_errors_max()).collect::<Vec<_>>()),
        max_regret: mean_columns(&runs.iter().map(|r| r.trajectory.regrets()).collect::<Vec<_>>()),
    }
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    pub network: NetworkConfig,
    pub runs: Vec<RunOutput>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub variants: Vec<VariantResult>,
    /// The fixed game of a game-file scenario.
    pub fixed_game: Option<ReferencedGame>,
}

impl ExperimentResult {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

enum Instance {
    Target { staged: StagedGame<TargetAssignmentGame>, n_targets: usize },
    Matrix { game: NormalFormGame, potential: PotentialFunction, atlas: Option<EquilibriumAtlas>, delta: f64 },
}

impl Instance {
    fn source(&self) -> &dyn OracleSource {
        match self {
            Instance::Target { staged, .. } => staged,
            Instance::Matrix { game, .. } => game,
        }
    }
}

fn target_instance(s: &TargetScenario, master: u64, run: u64, horizon: usize) -> Result<Instance> {
    let staged = if s.equal_distance {
        StagedGame::new(vec![TargetAssignmentGame::equal_distance(s.n_agents, s.n_targets, s.distance)?])?
    } else {
        let geometry = Geometry::sample(s.n_agents, s.n_targets, &s.geometry, stream_seed(master, run, Stream::Geometry))?;
        let model = SignalModel {
            noise_std: s.noise_std,
            signal_cutoff: s.signal_cutoff,
            seed: stream_seed(master, run, Stream::Signals),
        };
        StagedGame::from_estimates(&estimate_targets(&model, &geometry, horizon)?)?
    };
    Ok(Instance::Target { staged, n_targets: s.n_targets })
}

fn instance(config: &ExperimentConfig, fixed: Option<&ReferencedGame>, run: u64) -> Result<Instance> {
    let master = config.replication.master_seed;
    match &config.scenario {
        Scenario::TargetAssignment(s) => target_instance(s, master, run, config.dfp.horizon),
        Scenario::GameFile { .. } => {
            let f = fixed.expect("game-file scenarios are loaded before running");
            Ok(Instance::Matrix {
                game: f.game.clone(),
                potential: f.potential.clone(),
                atlas: f.atlas.clone(),
                delta: config.analysis.delta.unwrap_or(f.measured_delta),
            })
        }
        Scenario::DeskSuite { n_agents, n_actions, delta } => {
            let (base, potential) = random_potential_game(*n_agents, *n_actions, stream_seed(master, run, Stream::Game))?;
            let perturbed = perturb_potential_game(&base, *delta, stream_seed(master, run, Stream::Perturbation))?;
            let atlas = match EquilibriumAtlas::from_game(&base) {
                Ok(a) => Some(a),
                Err(Error::Assumption(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(Instance::Matrix {
                game: perturbed.game,
                potential,
                atlas,
                delta: config.analysis.delta.unwrap_or(perturbed.delta),
            })
        }
    }
}

/// Runs replication `run` of `config` on `network`. Reproducible from
/// `(config, network, run)`.
pub fn run_one(
    config: &ExperimentConfig,
    fixed: Option<&ReferencedGame>,
    network: &NetworkConfig,
    run: usize,
) -> Result<RunOutput> {
    let master = config.replication.master_seed;
    let horizon = config.dfp.horizon;
    let inst = instance(config, fixed, run as u64)?;
    let source = inst.source();
    let n = source.n_agents();
    let a = &config.analysis;
    let mut theory = TheoryReport::default();

    let comm = match network.schedule(n, stream_seed(master, run as u64, Stream::Network))? {
        None => Communication::Centralized,
        Some(schedule) => {
            let weights = build_weights(&schedule, network.weight_rule(), horizon)?;
            let conn = check_connectivity(&schedule, horizon);
            theory.flag(
                "union graph connected",
                Some(conn.connected),
                format!("{} recurring edges", conn.union_edges.len()),
            );
            let interval = check_bounded_interval(&schedule, horizon);
            theory.flag("bounded interaction interval", Some(interval.bounded), format!("T_B = {}", interval.t_b));
            let audit = audit_weights(&weights, horizon);
            theory.flag(
                "weights row-stochastic with positive floor",
                Some(audit.passed()),
                format!("eta = {}, max row error {:.1e}", audit.eta, audit.max_row_error),
            );
            Communication::Network(weights)
        }
    };

    let (potential, delta, atlas) = match &inst {
        Instance::Target { n_targets, .. } => {
            let atlas = (n == *n_targets).then(|| EquilibriumAtlas::one_to_one(n)).transpose()?;
            (None, 0.0, atlas)
        }
        Instance::Matrix { potential, atlas, delta, .. } => {
            let dense = profile_count(n, source.n_actions()).is_some_and(|s| s <= DENSE_LIMIT);
            theory.delta = Some(*delta);
            theory.flag(
                "pure equilibrium exists",
                Some(atlas.is_some()),
                format!("{} pure equilibria of the reference", atlas.as_ref().map_or(0, |a| a.count())),
            );
            (dense.then(|| potential.clone()), *delta, atlas.clone())
        }
    };

    let run_config = RunConfig {
        horizon,
        tiebreak: config.dfp.tiebreak,
        tiebreak_seed: stream_seed(master, run as u64, Stream::Tiebreak),
        initial: config.dfp.initial.clone(),
        lemma1_preset: config.dfp.lemma1_preset,
        strict_assumptions: config.dfp.strict_assumptions,
        record_beliefs: false,
        reference_potential: potential.clone(),
    };
    let trajectory = dfp::run(source, &comm, &run_config)?;

    let step_sizes = analysis::check_step_sizes(&trajectory);
    theory.violations.push(ViolationCount {
        check: "step size".into(),
        count: step_sizes.violations.len(),
        steps: step_sizes.violations.clone(),
    });

    let consensus = match &comm {
        Communication::Network(_) if horizon >= a.consensus_from.max(2) => {
            Some(analysis::fit_consensus_rate(&trajectory.belief_errors_max(), a.consensus_from)?)
        }
        _ => None,
    };
    theory.consensus_c = consensus.as_ref().map(|c| c.c);

    let n_delta = n as f64 * delta;
    let regrets = trajectory.regrets();
    let mut lemma2 = None;
    let mut excursions = Vec::new();
    let mut excursion_failures = None;
    if let (Some(_), Some(pots)) = (&potential, trajectory.potentials()) {
        let eps = a.eps.unwrap_or(if delta > 0.0 { 2.0 * n_delta } else { a.default_eps });
        let params = Lemma2Params { delta, eps, t_start: a.burn_in, fit_until: None };
        let report = analysis::lemma2_monitor_series(&regrets, &pots, n, &params)?;
        theory.increment_c = Some(report.fitted_c);
        theory.violations.push(ViolationCount {
            check: "potential increment".into(),
            count: report.violations.len(),
            steps: report.violations.iter().map(|v| v.t).collect(),
        });
        lemma2 = Some(report);
        excursions = analysis::detect_excursions(&regrets, Some(&pots), n, a.eps1, a.eps2, delta)?;
        let failing: Vec<usize> = excursions
            .iter()
            .filter(|r| r.t1 >= a.burn_in && r.gain_meets_bound() == Some(false))
            .map(|r| r.t1)
            .collect();
        theory.violations.push(ViolationCount { check: "excursion gain".into(), count: failing.len(), steps: failing.clone() });
        excursion_failures = Some(failing.len());
    }

    let avg_ne_distance = atlas
        .as_ref()
        .map(|at| analysis::fig1_metrics(&trajectory, at).map(|m| m.avg_ne_distance))
        .transpose()?;
    let basin = atlas
        .as_ref()
        .map(|at| analysis::basin_tracker_after(&trajectory, at, n_delta + a.eps1, a.burn_in.min(horizon)))
        .transpose()?;
    if let Some(at) = &atlas {
        theory.n_equilibria = Some(at.count());
        theory.d_star = at.d_star();
    }
    theory.final_basin = basin.as_ref().and_then(|b| b.verdict.clone());

    let last = trajectory.steps.last().expect("horizon is at least 1");
    let one_to_one = matches!(inst, Instance::Target { .. }).then(|| {
        let tail = a.tail.min(trajectory.len()).max(1);
        trajectory.steps[trajectory.len() - tail..].iter().all(|s| is_one_to_one(&s.actions))
    });

    let summary = RunSummary {
        run,
        network: network.label(),
        final_profile: last.actions.clone(),
        one_to_one,
        final_avg_ne_distance: avg_ne_distance.as_ref().and_then(|d| d.last().copied()),
        basin_verdict: theory.final_basin.clone(),
        basin_switches_after_entry: basin.as_ref().map(|b| b.switches_after_last_entry),
        step_size_violations: step_sizes.violations.len(),
        consensus_c: consensus.as_ref().map(|c| c.c),
        consensus_holds: consensus.as_ref().map(|c| c.holds),
        lemma2_qualifying: lemma2.as_ref().map(|r| r.qualifying.len()),
        lemma2_violations: lemma2.as_ref().map(|r| r.violations.len()),
        excursion_failures,
        assumptions: theory.assumptions.clone(),
    };
    Ok(RunOutput { summary, trajectory, avg_ne_distance, step_sizes, consensus, lemma2, excursions, basin, theory })
}

/// Loads the fixed game of a game-file scenario.
pub fn load_fixed_game(config: &ExperimentConfig) -> Result<Option<ReferencedGame>> {
    match &config.scenario {
        Scenario::GameFile { path, reference } => {
            let game = NormalFormGame::read(path)?;
            let reference = reference.as_ref().map(NormalFormGame::read).transpose()?;
            ReferencedGame::new(game, reference).map(Some)
        }
        _ => Ok(None),
    }
}

/// Runs every replication of every communication setting. Replications run in
/// parallel; results keep run order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let fixed = load_fixed_game(config)?;
    let variants = config
        .variants()
        .into_iter()
        .map(|network| {
            let runs = (0..config.replication.n_runs)
                .into_par_iter()
                .map(|r| run_one(config, fixed.as_ref(), &network, r))
                .collect::<Result<Vec<_>>>()?;
            let aggregate = aggregate(&runs);
            Ok(VariantResult { name: network.label(), network, runs, aggregate })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { config: config.clone(), variants, fixed_game: fixed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{NetworkConfig, NetworkKind};

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::fig1_preset();
        if let Scenario::TargetAssignment(s) = &mut cfg.scenario {
            s.n_agents = 4;
            s.n_targets = 4;
        }
        cfg.dfp.horizon = 60;
        cfg.replication.n_runs = 3;
        cfg
    }

    #[test]
    fn replications_are_reproducible() {
        let cfg = small();
        let net = NetworkConfig::of_kind(NetworkKind::Ring);
        let a = run_one(&cfg, None, &net, 1).unwrap();
        let b = run_one(&cfg, None, &net, 1).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.summary, b.summary);
        let c = run_one(&cfg, None, &net, 2).unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn aggregate_is_the_mean() {
        let res = run_experiment(&small()).unwrap();
        for v in &res.variants {
            let ne = v.aggregate.avg_ne_distance.as_ref().unwrap();
            for t in [0, 30, 59] {
                let m: f64 = v.runs.iter().map(|r| r.avg_ne_distance.as_ref().unwrap()[t]).sum::<f64>() / 3.0;
                assert!((ne[t] - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn desk_suite_run_reports_monitors() {
        let mut cfg = ExperimentConfig::desk_suite_preset();
        cfg.dfp.horizon = 300;
        cfg.replication.n_runs = 1;
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.variants.len(), 2);
        let run = &res.variants[0].runs[0];
        assert!(run.lemma2.is_some());
        assert!(run.summary.consensus_c.is_none());
        assert!(res.variants[1].runs[0].summary.consensus_c.is_some());
    }

    #[test]
    fn referenced_game_falls_back_to_lsq() {
        let g = crate::games::matching_pennies();
        let r = ReferencedGame::new(g, None).unwrap();
        assert!(!r.notes.is_empty());
        assert!(r.measured_delta > 0.0);
    }
}
