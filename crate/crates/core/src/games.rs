//! Concrete games: target assignment with noisy target estimates, small named
//! games, and near-potential perturbations of potential games.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dfp::OracleSource;
use crate::error::{Error, Result};
use crate::game::{
    check_agent, check_potential, check_strategies, mpd, profile_count, profile_index, MixedStrategy,
    NormalFormGame, PotentialFunction, UtilityOracle, DEFAULT_TOL, ENUMERATION_LIMIT,
};
use crate::seed;

/// Estimated distances below this are clamped to it.
pub const MIN_DISTANCE: f64 = 1e-6;

/// Each agent picks one target and is paid `1/d_{ik}` when no other agent
/// picked the same target, and nothing otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAssignmentGame {
    n_agents: usize,
    n_targets: usize,
    /// `distances[i][k] = d_{ik}`.
    distances: Vec<Vec<f64>>,
    /// Common distance when every `d_{ik}` is equal by construction.
    equal_distance: Option<f64>,
}

impl TargetAssignmentGame {
    pub fn new(distances: Vec<Vec<f64>>) -> Result<Self> {
        let n_agents = distances.len();
        let n_targets = distances.first().map(Vec::len).unwrap_or(0);
        if n_agents == 0 || n_targets == 0 {
            return Err(Error::InvalidParameter("need at least one agent and one target".into()));
        }
        if distances.iter().any(|row| row.len() != n_targets) {
            return Err(Error::DimensionMismatch("distance rows differ in length".into()));
        }
        if let Some(d) = distances.iter().flatten().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidParameter(format!("distance {d} is not strictly positive")));
        }
        Ok(Self { n_agents, n_targets, distances, equal_distance: None })
    }

    /// All agents at the same distance `d` from every target; a potential game.
    pub fn equal_distance(n_agents: usize, n_targets: usize, d: f64) -> Result<Self> {
        let mut g = Self::new(vec![vec![d; n_targets]; n_agents])?;
        g.equal_distance = Some(d);
        Ok(g)
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    pub fn is_equal_distance(&self) -> bool {
        self.equal_distance.is_some()
    }

    /// Realized payoff of `agent` at a pure profile.
    pub fn ta_utility(&self, agent: usize, profile: &[usize]) -> Result<f64> {
        check_agent(agent, self.n_agents)?;
        self.check_profile(profile)?;
        let k = profile[agent];
        let contested = profile.iter().enumerate().any(|(j, &a)| j != agent && a == k);
        Ok(if contested { 0.0 } else { 1.0 / self.distances[agent][k] })
    }

    /// `Π_{j≠i} (1 − υ_j(k)) / d_{ik}`: expected payoff of target `k` when the
    /// others play independently according to `beliefs`.
    pub fn ta_expected_utility(&self, agent: usize, target: usize, beliefs: &[MixedStrategy]) -> f64 {
        let free: f64 = beliefs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != agent)
            .map(|(_, b)| 1.0 - b[target])
            .product();
        free / self.distances[agent][target]
    }

    /// Number of covered targets over `d`, defined in equal-distance mode only.
    pub fn ta_potential(&self, profile: &[usize]) -> Result<f64> {
        let d = self
            .equal_distance
            .ok_or_else(|| Error::InvalidParameter("potential defined only for equal distances".into()))?;
        self.check_profile(profile)?;
        let mut covered = vec![false; self.n_targets];
        profile.iter().for_each(|&a| covered[a] = true);
        Ok(covered.iter().filter(|&&c| c).count() as f64 / d)
    }

    /// The potential as a dense table, checked against the potential identity.
    pub fn potential_function(&self) -> Result<PotentialFunction> {
        let game = self.to_normal_form()?;
        let size = game.n_profiles();
        let values = (0..size)
            .map(|idx| self.ta_potential(&crate::game::profile_at(idx, self.n_agents, self.n_targets)))
            .collect::<Result<Vec<_>>>()?;
        let residual = crate::game::potential_residual(&game, &values);
        if residual > DEFAULT_TOL {
            return Err(Error::NotPotential(residual));
        }
        Ok(PotentialFunction { n_agents: self.n_agents, n_actions: self.n_targets, values })
    }

    /// Dense normal form; only for enumerable sizes.
    pub fn to_normal_form(&self) -> Result<NormalFormGame> {
        let size = profile_count(self.n_agents, self.n_targets).unwrap_or(usize::MAX);
        if size > ENUMERATION_LIMIT {
            return Err(Error::SizeGuard {
                what: "K^N",
                size: size as u128,
                limit: ENUMERATION_LIMIT as u128,
            });
        }
        NormalFormGame::from_fn(self.n_agents, self.n_targets, |i, a| {
            self.ta_utility(i, a).expect("profile generated in range")
        })
    }

    fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.n_agents {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} entries for {} agents",
                profile.len(),
                self.n_agents
            )));
        }
        if let Some(&a) = profile.iter().find(|&&a| a >= self.n_targets) {
            return Err(Error::IndexOutOfRange { what: "target", index: a, limit: self.n_targets });
        }
        Ok(())
    }
}

impl UtilityOracle for TargetAssignmentGame {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn n_actions(&self) -> usize {
        self.n_targets
    }

    fn action_values(&self, agent: usize, others: &[MixedStrategy]) -> Result<Vec<f64>> {
        check_agent(agent, self.n_agents)?;
        check_strategies(others, self.n_agents, self.n_targets)?;
        Ok((0..self.n_targets).map(|k| self.ta_expected_utility(agent, k, others)).collect())
    }
}

/// True when no two agents share a target.
pub fn is_one_to_one(profile: &[usize]) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    profile.iter().all(|a| seen.insert(*a))
}

/// Agent and target positions in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub agents: Vec<[f64; 2]>,
    pub targets: Vec<[f64; 2]>,
}

/// Geometry defaults for randomly generated scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    /// Per-axis standard deviation of agent positions around the origin.
    pub agent_position_std: f64,
    /// Radius of the circle on which targets sit at equal angular spacing.
    pub target_radius: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self { agent_position_std: 0.1_f64.sqrt(), target_radius: 1.0 }
    }
}

impl Geometry {
    pub fn sample(n_agents: usize, n_targets: usize, spec: &GeometrySpec, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, spec.agent_position_std)
            .map_err(|e| Error::InvalidParameter(format!("agent position std: {e}")))?;
        let mut rng = seed::rng_from(seed);
        let agents = (0..n_agents)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        let targets = (0..n_targets)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / n_targets as f64;
                [spec.target_radius * angle.cos(), spec.target_radius * angle.sin()]
            })
            .collect();
        Ok(Self { agents, targets })
    }

    pub fn true_distances(&self) -> Vec<Vec<f64>> {
        self.agents
            .iter()
            .map(|a| self.targets.iter().map(|t| euclid(a, t).max(MIN_DISTANCE)).collect())
            .collect()
    }
}

fn euclid(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Private noisy observations of target positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Per-axis standard deviation of one signal.
    pub noise_std: f64,
    /// Last step at which signals arrive.
    pub signal_cutoff: usize,
    pub seed: u64,
}

/// Running target estimates after each signal step.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimates {
    /// `positions[s][i][k]`: agent `i`'s estimate of target `k` after `s + 1` signals.
    pub positions: Vec<Vec<Vec<[f64; 2]>>>,
    /// `distances[s][i][k]` from agent `i`'s position to that estimate, clamped below.
    pub distances: Vec<Vec<Vec<f64>>>,
}

impl TargetEstimates {
    pub fn final_distances(&self) -> &[Vec<f64>] {
        self.distances.last().expect("at least one signal step")
    }
}

/// Sample-mean estimates of every target for every agent, one signal per step
/// up to `min(signal_cutoff, horizon)` steps.
pub fn estimate_targets(model: &SignalModel, geometry: &Geometry, horizon: usize) -> Result<TargetEstimates> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if model.signal_cutoff < 1 {
        return Err(Error::InvalidParameter("signal cutoff must be at least 1".into()));
    }
    let noise = Normal::new(0.0, model.noise_std)
        .map_err(|e| Error::InvalidParameter(format!("noise std: {e}")))?;
    let mut rng = seed::rng_from(model.seed);
    let (n, k) = (geometry.agents.len(), geometry.targets.len());
    let steps = model.signal_cutoff.min(horizon);
    let mut mean = vec![vec![[0.0; 2]; k]; n];
    let mut positions = Vec::with_capacity(steps);
    let mut distances = Vec::with_capacity(steps);
    for s in 1..=steps {
        for agent_means in mean.iter_mut() {
            for (m, target) in agent_means.iter_mut().zip(&geometry.targets) {
                for axis in 0..2 {
                    let x = target[axis] + noise.sample(&mut rng);
                    // incremental mean keeps noiseless estimates exact
                    m[axis] = if s == 1 { x } else { m[axis] + (x - m[axis]) / s as f64 };
                }
            }
        }
        distances.push(
            geometry
                .agents
                .iter()
                .zip(&mean)
                .map(|(a, ms)| ms.iter().map(|m| euclid(a, m).max(MIN_DISTANCE)).collect())
                .collect(),
        );
        positions.push(mean.clone());
    }
    Ok(TargetEstimates { positions, distances })
}

/// A game that changes during the first steps and is frozen afterwards:
/// step `t` uses `stages[min(t, len) − 1]`.
#[derive(Debug, Clone)]
pub struct StagedGame<G> {
    stages: Vec<G>,
}

impl<G: UtilityOracle> StagedGame<G> {
    pub fn new(stages: Vec<G>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::InvalidParameter("staged game needs at least one stage".into()))?;
        let (n, k) = (first.n_agents(), first.n_actions());
        if stages.iter().any(|g| g.n_agents() != n || g.n_actions() != k) {
            return Err(Error::DimensionMismatch("stages differ in shape".into()));
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[G] {
        &self.stages
    }

    pub fn final_stage(&self) -> &G {
        self.stages.last().expect("nonempty")
    }
}

impl StagedGame<TargetAssignmentGame> {
    pub fn from_estimates(estimates: &TargetEstimates) -> Result<Self> {
        Self::new(
            estimates
                .distances
                .iter()
                .map(|d| TargetAssignmentGame::new(d.clone()))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

impl<G: UtilityOracle> OracleSource for StagedGame<G> {
    fn n_agents(&self) -> usize {
        self.stages[0].n_agents()
    }

    fn n_actions(&self) -> usize {
        self.stages[0].n_actions()
    }

    fn oracle_at(&self, t: usize) -> &dyn UtilityOracle {
        &self.stages[t.clamp(1, self.stages.len()) - 1]
    }
}

/// A perturbed game together with its achieved distance to the base.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub game: NormalFormGame,
    pub delta: f64,
    pub achieved_mpd: f64,
}

/// Adds i.i.d. `Uniform(−δ/4, δ/4)` noise to every utility entry of a potential
/// game. Each deviation difference involves two entries per game, so the
/// result is within MPD `δ` of the base.
pub fn perturb_potential_game(base: &NormalFormGame, delta: f64, seed: u64) -> Result<Perturbed> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta {delta} must be finite and nonnegative")));
    }
    let cert = check_potential(base, DEFAULT_TOL);
    if !cert.is_potential {
        return Err(Error::NotPotential(cert.max_residual));
    }
    let mut game = base.clone();
    if delta > 0.0 {
        let noise = Uniform::new_inclusive(-delta / 4.0, delta / 4.0)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = seed::rng_from(seed);
        for table in game.tables_mut() {
            for x in table.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }
    }
    let achieved_mpd = mpd(base, &game)?;
    Ok(Perturbed { game, delta, achieved_mpd })
}

/// Random potential game `u_i(a) = φ(a) + h_i(a_{−i})` with `φ` and the
/// dummy terms `h_i` drawn uniformly from `[0, 1)`. Returns the game and `φ`.
pub fn random_potential_game(n_agents: usize, n_actions: usize, seed: u64) -> Result<(NormalFormGame, PotentialFunction)> {
    let size = profile_count(n_agents, n_actions)
        .filter(|&s| s <= ENUMERATION_LIMIT)
        .ok_or_else(|| Error::InvalidParameter("random potential game too large".into()))?;
    let mut rng = seed::rng_from(seed);
    let phi: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
    let others = profile_count(n_agents - 1, n_actions).unwrap_or(1);
    let dummies: Vec<Vec<f64>> = (0..n_agents)
        .map(|_| (0..others).map(|_| rng.random::<f64>()).collect())
        .collect();
    let game = NormalFormGame::from_fn(n_agents, n_actions, |i, a| {
        let rest: Vec<usize> = a.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
        phi[profile_index(a, n_actions)] + dummies[i][profile_index(&rest, n_actions)]
    })?;
    Ok((game, PotentialFunction { n_agents, n_actions, values: phi }))
}

/// Both agents earn 1 when they pick the same action and 0 otherwise.
pub fn identity_coordination(n_actions: usize) -> NormalFormGame {
    NormalFormGame::from_fn(2, n_actions, |_, a| if a[0] == a[1] { 1.0 } else { 0.0 })
        .expect("valid coordination game")
}

/// Zero-sum 2×2 game without a pure equilibrium.
pub fn matching_pennies() -> NormalFormGame {
    NormalFormGame::new(2, 2, vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]])
        .expect("valid matching pennies")
}

/// Identical-interest 2×2 game paying 1 only at `(0, 0)`. Its equilibria are
/// exactly the two pure profiles `(0, 0)` and `(1, 1)`; there is no mixed one.
pub fn corner_coordination() -> NormalFormGame {
    NormalFormGame::identical_interest(2, 2, vec![1.0, 0.0, 0.0, 0.0]).expect("valid corner game")
}
