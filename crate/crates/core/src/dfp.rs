//! Decentralized fictitious play.
//!
//! Each step, every agent best-responds to its local copies of the others'
//! empirical frequencies from the previous step, updates its own frequency,
//! and then exchanges copies with its current neighbors. Play is synchronous.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_strategies, regret_of, JointMixedProfile, MixedStrategy, PotentialFunction, UtilityOracle};
use crate::netcomm::{self, WeightScheme};
use crate::seed;

/// Version tag written in the header comment of trajectory CSVs.
pub const TRAJECTORY_CSV_VERSION: u32 = 1;

/// Supplies the game in force at each step. Static games ignore `t`.
pub trait OracleSource: Sync {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn oracle_at(&self, t: usize) -> &dyn UtilityOracle;
}

impl<G: UtilityOracle> OracleSource for G {
    fn n_agents(&self) -> usize {
        UtilityOracle::n_agents(self)
    }

    fn n_actions(&self) -> usize {
        UtilityOracle::n_actions(self)
    }

    fn oracle_at(&self, _t: usize) -> &dyn UtilityOracle {
        self
    }
}

/// Local copies `υ^i_j`; entry `(i, j)` is agent `i`'s estimate of agent `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    entries: Vec<Vec<MixedStrategy>>,
}

impl BeliefState {
    pub fn new(entries: Vec<Vec<MixedStrategy>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("belief state has no agents".into()));
        }
        let k = entries[0].first().map(MixedStrategy::len).unwrap_or(0);
        for row in &entries {
            check_strategies(row, n, k)?;
            for s in row {
                MixedStrategy::new(s.probs().to_vec())?;
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_raw(entries: Vec<Vec<MixedStrategy>>) -> Self {
        Self { entries }
    }

    /// Every agent holds the exact frequencies: `υ^i_j = f_j`.
    pub fn from_frequencies(f: &JointMixedProfile) -> Self {
        Self { entries: vec![f.strategies().to_vec(); f.n_agents()] }
    }

    pub fn uniform(n_agents: usize, n_actions: usize) -> Self {
        Self { entries: vec![vec![MixedStrategy::uniform(n_actions); n_agents]; n_agents] }
    }

    pub fn n_agents(&self) -> usize {
        self.entries.len()
    }

    pub fn n_actions(&self) -> usize {
        self.entries[0][0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> &MixedStrategy {
        &self.entries[i][j]
    }

    /// Agent `i`'s view of everyone.
    pub fn row(&self, i: usize) -> &[MixedStrategy] {
        &self.entries[i]
    }

    /// Sets `υ^i_i = f_i` for every agent.
    pub fn pin_diagonal(&mut self, f: &JointMixedProfile) {
        for (i, row) in self.entries.iter_mut().enumerate() {
            row[i] = f[i].clone();
        }
    }

    /// `max_{i,j} ‖υ^i_j − f_j‖`.
    pub fn max_error(&self, f: &JointMixedProfile) -> f64 {
        self.entries
            .iter()
            .flat_map(|row| row.iter().zip(f.strategies()).map(|(b, fj)| b.distance(fj)))
            .fold(0.0, f64::max)
    }

    /// `(1/(N(N−1))) Σ_i Σ_{j≠i} ‖f_i − υ^j_i‖`; zero for a single agent.
    pub fn avg_error(&self, f: &JointMixedProfile) -> f64 {
        let n = self.entries.len();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                total += f[i].distance(&self.entries[j][i]);
            }
        }
        total / (n * (n - 1)) as f64
    }
}

/// `f_t = ((t−1)/t)·f_{t−1} + (1/t)·e_action`, for `t ≥ 1`.
pub fn empirical_update(f: &MixedStrategy, action: usize, t: usize) -> Result<MixedStrategy> {
    if t < 1 {
        return Err(Error::InvalidParameter("empirical update needs t >= 1".into()));
    }
    if action >= f.len() {
        return Err(Error::IndexOutOfRange { what: "action", index: action, limit: f.len() });
    }
    if t == 1 {
        return Ok(MixedStrategy::pure(action, f.len()));
    }
    let step = 1.0 / t as f64;
    let probs = f
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let target = if k == action { 1.0 } else { 0.0 };
            p + (target - p) * step
        })
        .collect();
    Ok(MixedStrategy::from_raw(probs))
}

/// Tie-breaking policy among maximizing actions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    SeededUniform,
}

/// Runtime state of a [`TieBreak`] policy.
#[derive(Debug, Clone)]
pub enum TieBreaker {
    LowestIndex,
    SeededUniform(ChaCha8Rng),
}

impl TieBreaker {
    pub fn new(policy: TieBreak, seed: u64) -> Self {
        match policy {
            TieBreak::LowestIndex => TieBreaker::LowestIndex,
            TieBreak::SeededUniform => TieBreaker::SeededUniform(seed::rng_from(seed)),
        }
    }

    /// Index of a maximal value; exact ties only.
    pub fn argmax(&mut self, values: &[f64]) -> usize {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            TieBreaker::LowestIndex => values.iter().position(|&v| v == best).unwrap_or(0),
            TieBreaker::SeededUniform(rng) => {
                let ties: Vec<usize> = (0..values.len()).filter(|&k| values[k] == best).collect();
                if ties.len() <= 1 {
                    ties.first().copied().unwrap_or(0)
                } else {
                    ties[rng.random_range(0..ties.len())]
                }
            }
        }
    }
}

/// `argmax_k u_agent(k, υ^agent_{−agent})`.
pub fn best_response(
    oracle: &dyn UtilityOracle,
    agent: usize,
    beliefs: &[MixedStrategy],
    tiebreak: &mut TieBreaker,
) -> Result<usize> {
    let values = oracle.action_values(agent, beliefs)?;
    Ok(tiebreak.argmax(&values))
}

/// How agents learn the others' frequencies.
#[derive(Debug, Clone)]
pub enum Communication {
    /// Standard fictitious play: everyone observes the true frequencies.
    Centralized,
    /// Local copies averaged over a time-varying network.
    Network(WeightScheme),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfpState {
    pub t: usize,
    pub frequencies: JointMixedProfile,
    pub beliefs: BeliefState,
    pub last_actions: Vec<usize>,
}

impl DfpState {
    /// State at `t = 0`. With `copy_to_beliefs` every local copy starts at the
    /// true initial frequency; otherwise off-diagonal copies start uniform.
    pub fn initial(frequencies: JointMixedProfile, copy_to_beliefs: bool) -> Self {
        let n = frequencies.n_agents();
        let beliefs = if copy_to_beliefs {
            BeliefState::from_frequencies(&frequencies)
        } else {
            let mut b = BeliefState::uniform(n, frequencies.n_actions());
            b.pin_diagonal(&frequencies);
            b
        };
        Self { t: 0, frequencies, beliefs, last_actions: Vec::new() }
    }
}

/// One synchronous round: actions, frequency update, then belief exchange.
pub fn dfp_step(
    oracle: &dyn UtilityOracle,
    state: &DfpState,
    comm: &Communication,
    tiebreak: &mut TieBreaker,
) -> Result<DfpState> {
    let n = state.frequencies.n_agents();
    check_strategies(state.frequencies.strategies(), oracle.n_agents(), oracle.n_actions())?;
    let t = state.t + 1;
    let actions = (0..n)
        .map(|i| best_response(oracle, i, state.beliefs.row(i), tiebreak))
        .collect::<Result<Vec<_>>>()?;
    let frequencies = JointMixedProfile::from_raw(
        state
            .frequencies
            .strategies()
            .iter()
            .zip(&actions)
            .map(|(f, &a)| empirical_update(f, a, t))
            .collect::<Result<Vec<_>>>()?,
    );
    let beliefs = match comm {
        Communication::Centralized => BeliefState::from_frequencies(&frequencies),
        Communication::Network(weights) => {
            let mut pinned = state.beliefs.clone();
            pinned.pin_diagonal(&frequencies);
            netcomm::belief_update(&pinned, weights, t)?
        }
    };
    Ok(DfpState { t, frequencies, beliefs, last_actions: actions })
}

/// Starting frequencies `f_{i,0}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitialRule {
    #[default]
    Uniform,
    Pure { profile: Vec<usize> },
    Given { profile: JointMixedProfile },
}

impl InitialRule {
    pub fn frequencies(&self, n_agents: usize, n_actions: usize) -> Result<JointMixedProfile> {
        match self {
            InitialRule::Uniform => Ok(JointMixedProfile::uniform(n_agents, n_actions)),
            InitialRule::Pure { profile } => {
                if profile.len() != n_agents || profile.iter().any(|&a| a >= n_actions) {
                    return Err(Error::DimensionMismatch("initial pure profile does not fit the game".into()));
                }
                Ok(JointMixedProfile::pure(profile, n_actions))
            }
            InitialRule::Given { profile } => {
                check_strategies(profile.strategies(), n_agents, n_actions)?;
                Ok(profile.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub horizon: usize,
    pub tiebreak: TieBreak,
    pub tiebreak_seed: u64,
    pub initial: InitialRule,
    /// Copy `f_{j,0}` into every `υ^i_{j,0}`.
    pub lemma1_preset: bool,
    /// Fail before running if the network violates the connectivity,
    /// bounded-interval or weight conditions.
    pub strict_assumptions: bool,
    pub record_beliefs: bool,
    /// Potential evaluated at `f_t` for the trajectory's potential column.
    pub reference_potential: Option<PotentialFunction>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: 500,
            tiebreak: TieBreak::LowestIndex,
            tiebreak_seed: 0,
            initial: InitialRule::Uniform,
            lemma1_preset: true,
            strict_assumptions: false,
            record_beliefs: false,
            reference_potential: None,
        }
    }
}

/// Everything recorded at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub actions: Vec<usize>,
    pub frequencies: JointMixedProfile,
    pub regrets: Vec<f64>,
    pub max_regret: f64,
    pub potential: Option<f64>,
    pub belief_error_max: f64,
    pub belief_error_avg: f64,
    pub beliefs: Option<BeliefState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_agents: usize,
    pub n_actions: usize,
    pub initial_frequencies: JointMixedProfile,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn regrets(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.max_regret).collect()
    }

    pub fn frequencies(&self) -> Vec<JointMixedProfile> {
        self.steps.iter().map(|s| s.frequencies.clone()).collect()
    }

    pub fn potentials(&self) -> Option<Vec<f64>> {
        self.steps.iter().map(|s| s.potential).collect()
    }

    pub fn belief_errors_max(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.belief_error_max).collect()
    }

    pub fn belief_errors_avg(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.belief_error_avg).collect()
    }

    /// `‖f_t − f_{t−1}‖` for `t = 1..=horizon`, with `f_0` the initial frequencies.
    pub fn step_sizes(&self) -> Vec<f64> {
        let mut prev = &self.initial_frequencies;
        self.steps
            .iter()
            .map(|s| {
                let d = s.frequencies.distance(prev);
                prev = &s.frequencies;
                d
            })
            .collect()
    }

    /// Trajectory CSV: a versioned header comment, then one row per step with
    /// `t`, per-agent actions, per-agent regrets, the potential, the average
    /// distance to the nearest equilibrium, and the belief errors. Empty
    /// fields mean the value was not computed.
    pub fn to_csv(&self, avg_ne_distance: Option<&[f64]>) -> String {
        let n = self.n_agents;
        let mut out = format!(
            "# nearpot-dfp trajectory v{TRAJECTORY_CSV_VERSION} n_agents={n} n_actions={}\n",
            self.n_actions
        );
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("action_{i}")));
        header.extend((0..n).map(|i| format!("regret_{i}")));
        header.extend(["potential", "avg_ne_distance", "avg_belief_error", "max_belief_error"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for (idx, s) in self.steps.iter().enumerate() {
            let _ = write!(out, "{}", s.t);
            for a in &s.actions {
                let _ = write!(out, ",{a}");
            }
            for r in &s.regrets {
                let _ = write!(out, ",{r}");
            }
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                opt(s.potential),
                opt(avg_ne_distance.map(|d| d[idx])),
                s.belief_error_avg,
                s.belief_error_max
            );
        }
        out
    }
}

/// Runs `config.horizon` rounds. Deterministic given the inputs.
pub fn run(source: &dyn OracleSource, comm: &Communication, config: &RunConfig) -> Result<Trajectory> {
    let (n, k) = (source.n_agents(), source.n_actions());
    if config.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if let Communication::Network(weights) = comm {
        if weights.schedule().n_agents() != n {
            return Err(Error::DimensionMismatch("network size differs from the game".into()));
        }
        if config.strict_assumptions {
            check_network_assumptions(weights, config.horizon)?;
        }
    }
    if let Some(p) = &config.reference_potential {
        if p.n_agents != n || p.n_actions != k {
            return Err(Error::DimensionMismatch("reference potential does not fit the game".into()));
        }
    }

    let f0 = config.initial.frequencies(n, k)?;
    let mut state = DfpState::initial(f0.clone(), config.lemma1_preset);
    let mut tiebreak = TieBreaker::new(config.tiebreak, config.tiebreak_seed);
    let mut steps = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        let oracle = source.oracle_at(t);
        state = dfp_step(oracle, &state, comm, &mut tiebreak)?;
        let regret = regret_of(oracle, state.frequencies.strategies())?;
        let potential = config
            .reference_potential
            .as_ref()
            .map(|p| p.expected(&state.frequencies))
            .transpose()?;
        steps.push(StepRecord {
            t,
            actions: state.last_actions.clone(),
            frequencies: state.frequencies.clone(),
            regrets: regret.per_agent,
            max_regret: regret.overall,
            potential,
            belief_error_max: state.beliefs.max_error(&state.frequencies),
            belief_error_avg: state.beliefs.avg_error(&state.frequencies),
            beliefs: config.record_beliefs.then(|| state.beliefs.clone()),
        });
    }
    Ok(Trajectory { n_agents: n, n_actions: k, initial_frequencies: f0, steps })
}

/// Connectivity, bounded interval and weight conditions over `horizon`.
pub fn check_network_assumptions(weights: &WeightScheme, horizon: usize) -> Result<()> {
    let conn = netcomm::check_connectivity(weights.schedule(), horizon);
    if !conn.connected {
        return Err(Error::Assumption("union graph is not connected".into()));
    }
    let interval = netcomm::check_bounded_interval(weights.schedule(), horizon);
    if !interval.bounded {
        return Err(Error::Assumption(format!(
            "communication interval not bounded over the horizon (T_B = {})",
            interval.t_b
        )));
    }
    let window = weights.schedule().period().unwrap_or(horizon);
    let audit = netcomm::audit_weights(weights, window);
    if !audit.passed() {
        return Err(Error::Assumption(format!("weights violate the averaging conditions: {audit:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::NormalFormGame;
    use crate::netcomm::{build_weights, GraphSchedule, WeightRule};

    fn coordination() -> NormalFormGame {
        NormalFormGame::identical_interest(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn empirical_update_examples() {
        let f = MixedStrategy::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(empirical_update(&f, 1, 1).unwrap(), MixedStrategy::pure(1, 2));
        let e0 = MixedStrategy::pure(0, 2);
        assert_eq!(empirical_update(&e0, 1, 2).unwrap().probs(), &[0.5, 0.5]);
        let mut g = MixedStrategy::pure(2, 3);
        for t in 1..500 {
            g = empirical_update(&g, 2, t).unwrap();
            assert_eq!(g, MixedStrategy::pure(2, 3));
        }
        assert!(empirical_update(&f, 0, 0).is_err());
        assert!(empirical_update(&f, 2, 3).is_err());
    }

    #[test]
    fn argmax_policies() {
        assert_eq!(TieBreaker::LowestIndex.argmax(&[0.3, 0.7]), 1);
        assert_eq!(TieBreaker::LowestIndex.argmax(&[0.5, 0.5]), 0);
        let mut seeded = TieBreaker::new(TieBreak::SeededUniform, 3);
        let picks: Vec<usize> = (0..64).map(|_| seeded.argmax(&[1.0, 0.0, 1.0])).collect();
        assert!(picks.iter().all(|&p| p == 0 || p == 2));
        assert!(picks.contains(&0) && picks.contains(&2));
    }

    #[test]
    fn single_agent_repeats_its_best_action() {
        let g = NormalFormGame::new(1, 3, vec![vec![0.1, 0.9, 0.4]]).unwrap();
        let cfg = RunConfig { horizon: 20, ..RunConfig::default() };
        let traj = run(&g, &Communication::Centralized, &cfg).unwrap();
        for s in &traj.steps {
            assert_eq!(s.actions, vec![1]);
            assert_eq!(s.frequencies[0], MixedStrategy::pure(1, 3));
        }
    }

    #[test]
    fn diagonal_beliefs_track_own_frequency() {
        let g = coordination();
        let w = build_weights(&GraphSchedule::ring(2), WeightRule::default(), 1).unwrap();
        let cfg = RunConfig { horizon: 30, record_beliefs: true, ..RunConfig::default() };
        let traj = run(&g, &Communication::Network(w), &cfg).unwrap();
        for s in &traj.steps {
            let b = s.beliefs.as_ref().unwrap();
            for i in 0..2 {
                assert_eq!(b.get(i, i), &s.frequencies[i]);
            }
        }
    }

    #[test]
    fn direct_source_on_complete_graph_is_centralized_fp() {
        let g = NormalFormGame::new(
            3,
            3,
            (0..3)
                .map(|i| (0..27).map(|x| ((x * 7 + i * 5) % 11) as f64 / 10.0).collect())
                .collect(),
        )
        .unwrap();
        let w = build_weights(&GraphSchedule::complete(3), WeightRule::DirectSource, 1).unwrap();
        let cfg = RunConfig { horizon: 200, ..RunConfig::default() };
        let a = run(&g, &Communication::Centralized, &cfg).unwrap();
        let b = run(&g, &Communication::Network(w), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_one_records_first_actions() {
        let g = coordination();
        let cfg = RunConfig { horizon: 1, ..RunConfig::default() };
        let traj = run(&g, &Communication::Centralized, &cfg).unwrap();
        assert_eq!(traj.len(), 1);
        let s = &traj.steps[0];
        assert_eq!(s.frequencies, JointMixedProfile::pure(&s.actions, 2));
    }

    #[test]
    fn coordination_from_pure_start_stays_put() {
        let cfg = RunConfig {
            horizon: 3,
            initial: InitialRule::Pure { profile: vec![0, 0] },
            ..RunConfig::default()
        };
        let traj = run(&coordination(), &Communication::Centralized, &cfg).unwrap();
        for s in &traj.steps {
            assert_eq!(s.actions, vec![0, 0]);
            assert_eq!(s.max_regret, 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic_and_config_errors_surface() {
        let g = coordination();
        let cfg = RunConfig { horizon: 50, tiebreak: TieBreak::SeededUniform, tiebreak_seed: 9, ..RunConfig::default() };
        let a = run(&g, &Communication::Centralized, &cfg).unwrap();
        let b = run(&g, &Communication::Centralized, &cfg).unwrap();
        assert_eq!(a, b);
        let bad = RunConfig { horizon: 0, ..RunConfig::default() };
        assert!(matches!(run(&g, &Communication::Centralized, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn strict_mode_rejects_disconnected_networks() {
        let g = NormalFormGame::identical_interest(3, 2, vec![0.0; 8]).unwrap();
        let s = GraphSchedule::static_edges(3, vec![(0, 1)]).unwrap();
        let w = build_weights(&s, WeightRule::default(), 1).unwrap();
        let cfg = RunConfig { horizon: 5, strict_assumptions: true, ..RunConfig::default() };
        assert!(matches!(run(&g, &Communication::Network(w), &cfg), Err(Error::Assumption(_))));
    }
}
