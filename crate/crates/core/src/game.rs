//! Normal-form games over a common finite action set.
//!
//! Utility tables are dense. A joint pure profile `a = (a_0, …, a_{N-1})` is
//! stored at row-major index `Σ a_i · K^(N-1-i)`, so agent 0 is the slowest
//! axis. This layout is part of the game file format and must stay stable.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for simplex, regret and potential residual checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest table the least-squares surrogate and the mixed-profile monitors accept.
pub const DENSE_LIMIT: usize = 4096;

/// Largest number of profiles `enumerate_pure_ne` scans.
pub const ENUMERATION_LIMIT: usize = 10_000_000;

/// A joint pure action profile, one action index per agent.
pub type PureProfile = Vec<usize>;

/// Number of joint profiles `K^N`, or `None` on overflow.
pub fn profile_count(n_agents: usize, n_actions: usize) -> Option<usize> {
    let exp = u32::try_from(n_agents).ok()?;
    n_actions.checked_pow(exp)
}

/// Row-major index of a pure profile.
pub fn profile_index(profile: &[usize], n_actions: usize) -> usize {
    profile.iter().fold(0, |acc, &a| acc * n_actions + a)
}

/// Inverse of [`profile_index`].
pub fn profile_at(mut index: usize, n_agents: usize, n_actions: usize) -> PureProfile {
    let mut profile = vec![0; n_agents];
    for slot in profile.iter_mut().rev() {
        *slot = index % n_actions;
        index /= n_actions;
    }
    profile
}

fn strides(n_agents: usize, n_actions: usize) -> Vec<usize> {
    let mut s = vec![1; n_agents];
    for i in (0..n_agents.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * n_actions;
    }
    s
}

/// A probability vector over the action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    /// Validates nonnegativity and unit sum within [`DEFAULT_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// The unit vector `e_action`.
    pub fn pure(action: usize, n_actions: usize) -> Self {
        let mut v = vec![0.0; n_actions];
        v[action] = 1.0;
        Self(v)
    }

    pub fn uniform(n_actions: usize) -> Self {
        Self(vec![1.0 / n_actions as f64; n_actions])
    }

    /// Skips validation; callers guarantee the simplex invariant.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The action carrying all mass, if the strategy is degenerate.
    pub fn as_pure(&self) -> Option<usize> {
        let k = self.0.iter().position(|&p| p == 1.0)?;
        self.0.iter().enumerate().all(|(j, &p)| j == k || p == 0.0).then_some(k)
    }

    /// Euclidean distance between two strategies.
    pub fn distance(&self, other: &MixedStrategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Squared Euclidean distance to the unit vector `e_action`.
    pub fn sq_distance_to_pure(&self, action: usize) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let d = if k == action { p - 1.0 } else { p };
                d * d
            })
            .sum()
    }
}

impl std::ops::Index<usize> for MixedStrategy {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// One mixed strategy per agent, all over the same action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointMixedProfile(Vec<MixedStrategy>);

impl JointMixedProfile {
    pub fn new(strategies: Vec<MixedStrategy>) -> Result<Self> {
        let Some(first) = strategies.first() else {
            return Err(Error::DimensionMismatch("profile has no agents".into()));
        };
        let k = first.len();
        if strategies.iter().any(|s| s.len() != k) {
            return Err(Error::DimensionMismatch("agents use action sets of different sizes".into()));
        }
        Ok(Self(strategies))
    }

    pub fn pure(profile: &[usize], n_actions: usize) -> Self {
        Self(profile.iter().map(|&a| MixedStrategy::pure(a, n_actions)).collect())
    }

    pub fn uniform(n_agents: usize, n_actions: usize) -> Self {
        Self(vec![MixedStrategy::uniform(n_actions); n_agents])
    }

    pub(crate) fn from_raw(strategies: Vec<MixedStrategy>) -> Self {
        Self(strategies)
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.0
    }

    pub fn into_strategies(self) -> Vec<MixedStrategy> {
        self.0
    }

    pub fn n_agents(&self) -> usize {
        self.0.len()
    }

    pub fn n_actions(&self) -> usize {
        self.0[0].len()
    }

    /// Euclidean distance between the concatenated per-agent vectors.
    pub fn distance(&self, other: &JointMixedProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = a.distance(b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Concatenated-norm distance to a pure profile.
    pub fn distance_to_pure(&self, profile: &[usize]) -> f64 {
        self.0
            .iter()
            .zip(profile)
            .map(|(s, &a)| s.sq_distance_to_pure(a))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<usize> for JointMixedProfile {
    type Output = MixedStrategy;
    fn index(&self, i: usize) -> &MixedStrategy {
        &self.0[i]
    }
}

/// Anything that can score an agent's pure actions against independent
/// beliefs about the other agents.
pub trait UtilityOracle: Sync {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;

    /// `u_agent(k, σ_{-agent})` for every action `k`. The entry
    /// `others[agent]` is ignored.
    fn action_values(&self, agent: usize, others: &[MixedStrategy]) -> Result<Vec<f64>>;
}

pub(crate) fn check_agent(agent: usize, n_agents: usize) -> Result<()> {
    if agent >= n_agents {
        return Err(Error::IndexOutOfRange { what: "agent", index: agent, limit: n_agents });
    }
    Ok(())
}

pub(crate) fn check_strategies(strategies: &[MixedStrategy], n_agents: usize, n_actions: usize) -> Result<()> {
    if strategies.len() != n_agents {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} agents, game has {n_agents}",
            strategies.len()
        )));
    }
    if let Some(s) = strategies.iter().find(|s| s.len() != n_actions) {
        return Err(Error::DimensionMismatch(format!(
            "strategy has {} actions, game has {n_actions}",
            s.len()
        )));
    }
    Ok(())
}

/// Depth-first walk over all joint profiles with positive product weight.
/// The `free` agent's own strategy is replaced by weight 1 on every action.
fn walk_weighted(
    n_actions: usize,
    strategies: &[MixedStrategy],
    free: Option<usize>,
    visit: &mut dyn FnMut(usize, usize, f64),
) {
    fn rec(
        depth: usize,
        index: usize,
        weight: f64,
        free_action: usize,
        k: usize,
        strategies: &[MixedStrategy],
        free: Option<usize>,
        visit: &mut dyn FnMut(usize, usize, f64),
    ) {
        if depth == strategies.len() {
            visit(index, free_action, weight);
            return;
        }
        for a in 0..k {
            if Some(depth) == free {
                rec(depth + 1, index * k + a, weight, a, k, strategies, free, visit);
            } else {
                let p = strategies[depth][a];
                if p > 0.0 {
                    rec(depth + 1, index * k + a, weight * p, free_action, k, strategies, free, visit);
                }
            }
        }
    }
    rec(0, 0, 1.0, 0, n_actions, strategies, free, visit);
}

/// Expected value of a dense table under independent per-agent strategies.
pub fn expected_table_value(table: &[f64], n_actions: usize, strategies: &[MixedStrategy]) -> f64 {
    let mut total = 0.0;
    walk_weighted(n_actions, strategies, None, &mut |idx, _, w| total += table[idx] * w);
    total
}

/// A finite game with N agents sharing K actions.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormGame {
    n_agents: usize,
    n_actions: usize,
    utilities: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    n_agents: usize,
    n_actions: usize,
    utilities: Vec<Vec<f64>>,
}

impl NormalFormGame {
    pub fn new(n_agents: usize, n_actions: usize, utilities: Vec<Vec<f64>>) -> Result<Self> {
        if n_agents == 0 || n_actions == 0 {
            return Err(Error::InvalidParameter("games need at least one agent and one action".into()));
        }
        let size = profile_count(n_agents, n_actions).ok_or(Error::SizeGuard {
            what: "profile count",
            size: u128::MAX,
            limit: usize::MAX as u128,
        })?;
        if utilities.len() != n_agents {
            return Err(Error::DimensionMismatch(format!(
                "{} utility tables for {n_agents} agents",
                utilities.len()
            )));
        }
        for (i, table) in utilities.iter().enumerate() {
            if table.len() != size {
                return Err(Error::DimensionMismatch(format!(
                    "agent {i} table has {} entries, expected {size}",
                    table.len()
                )));
            }
            if let Some(x) = table.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("agent {i} has non-finite utility {x}")));
            }
        }
        Ok(Self { n_agents, n_actions, utilities })
    }

    /// Builds every table by evaluating `f(agent, profile)`.
    pub fn from_fn(n_agents: usize, n_actions: usize, mut f: impl FnMut(usize, &[usize]) -> f64) -> Result<Self> {
        let size = profile_count(n_agents, n_actions)
            .ok_or_else(|| Error::InvalidParameter("profile count overflows".into()))?;
        let mut utilities = vec![Vec::with_capacity(size); n_agents];
        for idx in 0..size {
            let profile = profile_at(idx, n_agents, n_actions);
            for (i, table) in utilities.iter_mut().enumerate() {
                table.push(f(i, &profile));
            }
        }
        Self::new(n_agents, n_actions, utilities)
    }

    /// Every agent's utility equals `table`.
    pub fn identical_interest(n_agents: usize, n_actions: usize, table: Vec<f64>) -> Result<Self> {
        Self::new(n_agents, n_actions, vec![table; n_agents])
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_profiles(&self) -> usize {
        self.utilities[0].len()
    }

    pub fn table(&self, agent: usize) -> &[f64] {
        &self.utilities[agent]
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub(crate) fn tables_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.utilities
    }

    pub fn utility(&self, agent: usize, profile: &[usize]) -> Result<f64> {
        check_agent(agent, self.n_agents)?;
        self.check_profile(profile)?;
        Ok(self.utilities[agent][profile_index(profile, self.n_actions)])
    }

    fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.n_agents {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} entries, game has {} agents",
                profile.len(),
                self.n_agents
            )));
        }
        if let Some(&a) = profile.iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::IndexOutOfRange { what: "action", index: a, limit: self.n_actions });
        }
        Ok(())
    }

    /// Largest absolute utility entry over all agents.
    pub fn max_abs_utility(&self) -> f64 {
        self.utilities
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(file.n_agents, file.n_actions, file.utilities)
    }

    pub fn to_json_string(&self) -> String {
        let file = GameFile {
            n_agents: self.n_agents,
            n_actions: self.n_actions,
            utilities: self.utilities.clone(),
        };
        serde_json::to_string_pretty(&file).expect("game serialization cannot fail")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

impl UtilityOracle for NormalFormGame {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn action_values(&self, agent: usize, others: &[MixedStrategy]) -> Result<Vec<f64>> {
        check_agent(agent, self.n_agents)?;
        check_strategies(others, self.n_agents, self.n_actions)?;
        let table = &self.utilities[agent];
        let mut values = vec![0.0; self.n_actions];
        walk_weighted(self.n_actions, others, Some(agent), &mut |idx, k, w| {
            values[k] += table[idx] * w;
        });
        Ok(values)
    }
}

/// `u_agent(σ)` by exact enumeration of the joint profiles.
pub fn expected_utility(game: &NormalFormGame, agent: usize, profile: &JointMixedProfile) -> Result<f64> {
    check_agent(agent, game.n_agents)?;
    check_strategies(profile.strategies(), game.n_agents, game.n_actions)?;
    Ok(expected_table_value(&game.utilities[agent], game.n_actions, profile.strategies()))
}

/// `u_i(a'_i, a_{-i}) − u_i(a_i, a_{-i})`.
pub fn unilateral_deviation(game: &NormalFormGame, agent: usize, alt_action: usize, base: &[usize]) -> Result<f64> {
    check_agent(agent, game.n_agents)?;
    game.check_profile(base)?;
    if alt_action >= game.n_actions {
        return Err(Error::IndexOutOfRange { what: "action", index: alt_action, limit: game.n_actions });
    }
    let mut alt = base.to_vec();
    alt[agent] = alt_action;
    let table = &game.utilities[agent];
    Ok(table[profile_index(&alt, game.n_actions)] - table[profile_index(base, game.n_actions)])
}

/// Visits every `(agent, index, deviated index)` triple with a different action.
fn for_each_deviation(n_agents: usize, n_actions: usize, mut visit: impl FnMut(usize, usize, usize)) {
    let size = profile_count(n_agents, n_actions).unwrap_or(0);
    let strides = strides(n_agents, n_actions);
    for idx in 0..size {
        for (i, &stride) in strides.iter().enumerate() {
            let own = (idx / stride) % n_actions;
            let base = idx - own * stride;
            for alt in (0..n_actions).filter(|&alt| alt != own) {
                visit(i, idx, base + alt * stride);
            }
        }
    }
}

/// Maximum pairwise difference between two games of the same shape.
pub fn mpd(g1: &NormalFormGame, g2: &NormalFormGame) -> Result<f64> {
    if g1.n_agents != g2.n_agents || g1.n_actions != g2.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "games have shapes ({}, {}) and ({}, {})",
            g1.n_agents, g1.n_actions, g2.n_agents, g2.n_actions
        )));
    }
    let mut worst = 0.0_f64;
    for_each_deviation(g1.n_agents, g1.n_actions, |i, from, to| {
        let d1 = g1.utilities[i][to] - g1.utilities[i][from];
        let d2 = g2.utilities[i][to] - g2.utilities[i][from];
        worst = worst.max((d1 - d2).abs());
    });
    Ok(worst)
}

/// A potential table `u: 𝓐^N → ℝ` in the game's profile order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFunction {
    pub n_agents: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl PotentialFunction {
    pub fn at(&self, profile: &[usize]) -> f64 {
        self.values[profile_index(profile, self.n_actions)]
    }

    /// Multilinear extension to mixed profiles, by enumeration.
    pub fn expected(&self, profile: &JointMixedProfile) -> Result<f64> {
        check_strategies(profile.strategies(), self.n_agents, self.n_actions)?;
        Ok(expected_table_value(&self.values, self.n_actions, profile.strategies()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// The identical-interest game in which every agent's utility is this table.
    pub fn to_game(&self) -> NormalFormGame {
        NormalFormGame::identical_interest(self.n_agents, self.n_actions, self.values.clone())
            .expect("potential tables are finite and correctly sized")
    }
}

/// Outcome of [`check_potential`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCertificate {
    pub is_potential: bool,
    pub potential: Option<PotentialFunction>,
    pub max_residual: f64,
}

/// Largest violation of the potential identity for a candidate table.
pub fn potential_residual(game: &NormalFormGame, potential: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for_each_deviation(game.n_agents, game.n_actions, |i, from, to| {
        let du = potential[to] - potential[from];
        let di = game.utilities[i][to] - game.utilities[i][from];
        worst = worst.max((du - di).abs());
    });
    worst
}

/// Builds a candidate potential by summing unilateral utility changes along the
/// coordinate path from the all-zeros profile, then verifies the potential
/// identity over every deviation.
pub fn check_potential(game: &NormalFormGame, tol: f64) -> PotentialCertificate {
    let n = game.n_agents;
    let k = game.n_actions;
    let strides = strides(n, k);
    let mut values = vec![0.0; game.n_profiles()];
    for (idx, value) in values.iter_mut().enumerate() {
        // path_i = (a_0..a_i, 0..0); the switch of agent i moves path_{i-1} to path_i
        let mut prev = 0usize;
        let mut acc = 0.0;
        for (i, &stride) in strides.iter().enumerate() {
            let a_i = (idx / stride) % k;
            let next = prev + a_i * stride;
            acc += game.utilities[i][next] - game.utilities[i][prev];
            prev = next;
        }
        *value = acc;
    }
    let max_residual = potential_residual(game, &values);
    let is_potential = max_residual <= tol;
    PotentialCertificate {
        is_potential,
        potential: is_potential.then_some(PotentialFunction { n_agents: n, n_actions: k, values }),
        max_residual,
    }
}

/// Result of the least-squares potential fit.
#[derive(Debug, Clone)]
pub struct LsqPotential {
    /// Identical-interest game whose common utility is the fitted potential.
    pub game: NormalFormGame,
    pub certificate: PotentialCertificate,
    /// `mpd(input, game)`, the achieved closeness.
    pub delta: f64,
}

/// Fits a potential table minimizing the squared mismatch between unilateral
/// utility changes and potential changes, solved by conjugate gradients on the
/// normal equations. A surrogate for the max-norm closest potential game: the
/// achieved MPD is always reported.
pub fn nearest_potential_lsq(game: &NormalFormGame) -> Result<LsqPotential> {
    let size = game.n_profiles();
    if size > DENSE_LIMIT {
        return Err(Error::SizeGuard { what: "K^N", size: size as u128, limit: DENSE_LIMIT as u128 });
    }
    let (n, k) = (game.n_agents, game.n_actions);

    let mut rhs = vec![0.0; size];
    for_each_deviation(n, k, |i, from, to| {
        let d = game.utilities[i][to] - game.utilities[i][from];
        rhs[to] += d;
        rhs[from] -= d;
    });
    let apply = |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for_each_deviation(n, k, |_, from, to| {
            let r = x[to] - x[from];
            y[to] += r;
            y[from] -= r;
        });
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut x = vec![0.0; size];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; size];
    let mut rr = dot(&r, &r);
    let stop = 1e-26 * rr.max(1.0);
    for _ in 0..(10 * size).max(100) {
        if rr <= stop {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= step * api);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_next;
    }
    // anchor the additive constant at the all-zeros profile
    let base = x[0];
    x.iter_mut().for_each(|v| *v -= base);

    let fitted = NormalFormGame::identical_interest(n, k, x)?;
    let certificate = check_potential(&fitted, DEFAULT_TOL);
    let delta = mpd(game, &fitted)?;
    Ok(LsqPotential { game: fitted, certificate, delta })
}

/// Overall and per-agent regret of a mixed profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Regret {
    pub overall: f64,
    pub per_agent: Vec<f64>,
}

/// Per-agent regret `max_k u_i(k, σ_{-i}) − u_i(σ)`, clamped at zero; the
/// overall regret is the maximum over agents. A profile is an ε-NE iff its
/// overall regret is at most ε.
pub fn regret<O: UtilityOracle + ?Sized>(oracle: &O, profile: &JointMixedProfile) -> Result<Regret> {
    regret_of(oracle, profile.strategies())
}

pub(crate) fn regret_of<O: UtilityOracle + ?Sized>(oracle: &O, strategies: &[MixedStrategy]) -> Result<Regret> {
    check_strategies(strategies, oracle.n_agents(), oracle.n_actions())?;
    let per_agent = (0..oracle.n_agents())
        .map(|i| {
            let values = oracle.action_values(i, strategies)?;
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let current: f64 = values.iter().zip(strategies[i].probs()).map(|(v, p)| v * p).sum();
            Ok((best - current).max(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = per_agent.iter().copied().fold(0.0, f64::max);
    Ok(Regret { overall, per_agent })
}

/// All pure profiles at which no agent gains more than [`DEFAULT_TOL`] by deviating.
pub fn enumerate_pure_ne(game: &NormalFormGame) -> Result<Vec<PureProfile>> {
    enumerate_pure_ne_tol(game, DEFAULT_TOL)
}

pub fn enumerate_pure_ne_tol(game: &NormalFormGame, tol: f64) -> Result<Vec<PureProfile>> {
    let size = game.n_profiles();
    if size > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard {
            what: "K^N",
            size: size as u128,
            limit: ENUMERATION_LIMIT as u128,
        });
    }
    let (n, k) = (game.n_agents, game.n_actions);
    let strides = strides(n, k);
    let mut out = Vec::new();
    for idx in 0..size {
        let stable = strides.iter().enumerate().all(|(i, &stride)| {
            let own = (idx / stride) % k;
            let base = idx - own * stride;
            let current = game.utilities[i][idx];
            (0..k).all(|alt| game.utilities[i][base + alt * stride] - current <= tol)
        });
        if stable {
            out.push(profile_at(idx, n, k));
        }
    }
    Ok(out)
}

impl fmt::Display for PotentialCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "potential: {} (max residual {:.3e})",
            if self.is_potential { "yes" } else { "no" },
            self.max_residual
        )
    }
}
