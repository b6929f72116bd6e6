//! Numerical checks of the convergence theory on recorded trajectories.
//!
//! Distances between joint profiles are Euclidean on the concatenation of the
//! per-agent probability vectors. Equilibrium sets contain pure profiles only.
//! Every bound here is checked empirically; a pass under sampled quantities is
//! evidence, not a proof.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::dfp::Trajectory;
use crate::error::{Error, Result};
use crate::game::{
    enumerate_pure_ne, mpd, profile_at, profile_count, regret_of, JointMixedProfile, MixedStrategy,
    NormalFormGame, PotentialFunction, PureProfile, UtilityOracle, DENSE_LIMIT,
};
use crate::seed;

/// Tolerance used when deciding membership in an approximate-equilibrium set.
const SET_TOL: f64 = 1e-12;

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns `assignment[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r - 1][col - 1] - u[r] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

/// The reference equilibrium set `Σ_0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EquilibriumSet {
    Listed(Vec<PureProfile>),
    /// All permutations of `N` agents onto `N` actions; the equilibria of the
    /// target-assignment game with as many targets as agents.
    OneToOne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumAtlas {
    n_agents: usize,
    n_actions: usize,
    set: EquilibriumSet,
    d_star: Option<f64>,
}

fn pure_distance(a: &[usize], b: &[usize]) -> f64 {
    (2.0 * a.iter().zip(b).filter(|(x, y)| x != y).count() as f64).sqrt()
}

impl EquilibriumAtlas {
    pub fn from_profiles(n_agents: usize, n_actions: usize, profiles: Vec<PureProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Assumption("no equilibria: the reference set must be nonempty".into()));
        }
        for p in &profiles {
            if p.len() != n_agents || p.iter().any(|&a| a >= n_actions) {
                return Err(Error::DimensionMismatch(format!("equilibrium {p:?} does not fit the game")));
            }
        }
        let mut d_star: Option<f64> = None;
        for (m, a) in profiles.iter().enumerate() {
            for b in &profiles[m + 1..] {
                let d = pure_distance(a, b);
                d_star = Some(d_star.map_or(d, |x| x.min(d)));
            }
        }
        if d_star == Some(0.0) {
            return Err(Error::InvalidParameter("equilibrium list has duplicates".into()));
        }
        Ok(Self { n_agents, n_actions, set: EquilibriumSet::Listed(profiles), d_star })
    }

    /// Pure equilibria of `game` by enumeration.
    pub fn from_game(game: &NormalFormGame) -> Result<Self> {
        Self::from_profiles(game.n_agents(), game.n_actions(), enumerate_pure_ne(game)?)
    }

    pub fn one_to_one(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("one-to-one atlas needs at least one agent".into()));
        }
        let d_star = (n >= 2).then_some(2.0);
        Ok(Self { n_agents: n, n_actions: n, set: EquilibriumSet::OneToOne, d_star })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn set(&self) -> &EquilibriumSet {
        &self.set
    }

    /// `M`, the number of equilibria.
    pub fn count(&self) -> u128 {
        match &self.set {
            EquilibriumSet::Listed(v) => v.len() as u128,
            EquilibriumSet::OneToOne => (1..=self.n_agents as u128).product(),
        }
    }

    /// Minimum distance between two distinct equilibria; `None` when `M = 1`.
    pub fn d_star(&self) -> Option<f64> {
        self.d_star
    }

    /// Nearest equilibrium in the concatenated norm, and its distance.
    /// Ties go to the first listed equilibrium.
    pub fn nearest(&self, f: &[MixedStrategy]) -> (PureProfile, f64) {
        match &self.set {
            EquilibriumSet::Listed(list) => {
                let mut best = (0, f64::INFINITY);
                for (m, p) in list.iter().enumerate() {
                    let d2: f64 = f.iter().zip(p).map(|(s, &a)| s.sq_distance_to_pure(a)).sum();
                    if d2 < best.1 {
                        best = (m, d2);
                    }
                }
                (list[best.0].clone(), best.1.sqrt())
            }
            EquilibriumSet::OneToOne => {
                // ‖f − e_π‖² = Σ_i (‖f_i‖² + 1 − 2 f_i(π(i))): maximize Σ_i f_i(π(i))
                let cost: Vec<Vec<f64>> = f.iter().map(|s| s.probs().iter().map(|p| -p).collect()).collect();
                let perm = min_cost_assignment(&cost);
                let d2: f64 = f.iter().zip(&perm).map(|(s, &a)| s.sq_distance_to_pure(a)).sum();
                (perm, d2.sqrt())
            }
        }
    }

    /// Number of equilibria strictly within `radius` of `f`. For the one-to-one
    /// set only radii up to `d*/2` are supported, where at most one can qualify.
    pub fn count_within(&self, f: &[MixedStrategy], radius: f64) -> usize {
        match &self.set {
            EquilibriumSet::Listed(list) => list
                .iter()
                .filter(|p| {
                    let d2: f64 = f.iter().zip(p.iter()).map(|(s, &a)| s.sq_distance_to_pure(a)).sum();
                    d2.sqrt() < radius
                })
                .count(),
            EquilibriumSet::OneToOne => usize::from(self.nearest(f).1 < radius),
        }
    }
}

/// `(1/N) Σ_i ‖f_i − σ*_i‖` for the equilibrium `σ*` nearest to the joint `f`.
pub fn avg_ne_distance(f: &[MixedStrategy], atlas: &EquilibriumAtlas) -> f64 {
    let (ne, _) = atlas.nearest(f);
    f.iter().zip(&ne).map(|(s, &a)| s.sq_distance_to_pure(a).sqrt()).sum::<f64>() / f.len() as f64
}

/// Per-step series for the two panels of the convergence figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Series {
    pub avg_ne_distance: Vec<f64>,
    pub avg_belief_error: Vec<f64>,
}

pub fn fig1_metrics(trajectory: &Trajectory, atlas: &EquilibriumAtlas) -> Result<Fig1Series> {
    if atlas.n_agents != trajectory.n_agents || atlas.n_actions != trajectory.n_actions {
        return Err(Error::DimensionMismatch("atlas does not match the trajectory".into()));
    }
    Ok(Fig1Series {
        avg_ne_distance: trajectory
            .steps
            .iter()
            .map(|s| avg_ne_distance(s.frequencies.strategies(), atlas))
            .collect(),
        avg_belief_error: trajectory.belief_errors_avg(),
    })
}

/// Fit of `err_t ≤ C·ln(t)/t` over `t ∈ [from, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusFit {
    pub from: usize,
    /// `max_t err_t · t / ln t` over the window.
    pub c: f64,
    pub error_at_horizon: f64,
    /// `1.5 · C · ln(h)/h`.
    pub bound_at_horizon: f64,
    pub holds: bool,
}

/// `errors[t − 1]` is the consensus error at step `t`.
pub fn fit_consensus_rate(errors: &[f64], from: usize) -> Result<ConsensusFit> {
    let from = from.max(2);
    let h = errors.len();
    if h < from {
        return Err(Error::InvalidParameter(format!("series of length {h} shorter than window start {from}")));
    }
    let scaled = |t: usize| errors[t - 1] * t as f64 / (t as f64).ln();
    let c = (from..=h).map(scaled).fold(0.0, f64::max);
    let hf = h as f64;
    let bound_at_horizon = 1.5 * c * hf.ln() / hf;
    let error_at_horizon = errors[h - 1];
    Ok(ConsensusFit {
        from,
        c,
        error_at_horizon,
        bound_at_horizon,
        holds: c.is_finite() && error_at_horizon <= bound_at_horizon,
    })
}

/// Check of `‖f_t − f_{t−1}‖ ≤ 2N/t` at every recorded step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSizeCheck {
    pub violations: Vec<usize>,
    /// Largest `‖f_t − f_{t−1}‖ / (2N/t)`.
    pub max_ratio: f64,
}

impl StepSizeCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_step_sizes(trajectory: &Trajectory) -> StepSizeCheck {
    let two_n = 2.0 * trajectory.n_agents as f64;
    let mut violations = Vec::new();
    let mut max_ratio = 0.0_f64;
    for (idx, d) in trajectory.step_sizes().into_iter().enumerate() {
        let t = idx + 1;
        let bound = two_n / t as f64;
        max_ratio = max_ratio.max(d / bound);
        if d > bound {
            violations.push(t);
        }
    }
    StepSizeCheck { violations, max_ratio }
}

/// Settings of the potential-increment monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma2Params {
    pub delta: f64,
    pub eps: f64,
    /// First step the bound is asserted at.
    pub t_start: usize,
    /// Last step used to fit `C`; defaults to `2·t_start`.
    pub fit_until: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementViolation {
    pub t: usize,
    pub increment: f64,
    /// `(ε − Nδ)/(t+1) − C·ln t/t²`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    /// Steps `t ≥ t_start` (with a successor) whose frequencies lie outside `Σ_ε`.
    pub qualifying: Vec<usize>,
    pub fit_until: usize,
    /// Smallest `C ≥ 0` under which every qualifying step up to `fit_until` passes.
    pub fitted_c: f64,
    pub violations: Vec<IncrementViolation>,
    pub violation_fraction: f64,
}

/// Monitors `u(f_{t+1}) − u(f_t) ≥ (ε − Nδ)/(t+1) − C·ln t/t²` on every step
/// outside the ε-equilibrium set, with `C` fitted on the early steps.
/// `regrets[t − 1]` and `potentials[t − 1]` belong to step `t`.
pub fn lemma2_monitor_series(
    regrets: &[f64],
    potentials: &[f64],
    n_agents: usize,
    params: &Lemma2Params,
) -> Result<Lemma2Report> {
    let n_delta = n_agents as f64 * params.delta;
    if params.eps <= n_delta {
        return Err(Error::InvalidParameter(format!(
            "eps {} must exceed N·delta = {n_delta}",
            params.eps
        )));
    }
    if regrets.len() != potentials.len() {
        return Err(Error::DimensionMismatch("regret and potential series differ in length".into()));
    }
    let h = regrets.len();
    let t_start = params.t_start.max(2);
    let fit_until = params.fit_until.unwrap_or(2 * t_start);
    let base = |t: usize| (params.eps - n_delta) / (t + 1) as f64;
    let slack = |t: usize| (t as f64).ln() / (t as f64 * t as f64);

    let qualifying: Vec<usize> = (t_start..h).filter(|&t| regrets[t - 1] > params.eps).collect();
    let increment = |t: usize| potentials[t] - potentials[t - 1];
    let required = |t: usize| ((base(t) - increment(t)) / slack(t)).max(0.0);

    let fitted_c = qualifying
        .iter()
        .filter(|&&t| t <= fit_until)
        .map(|&t| required(t))
        .fold(0.0, f64::max);
    let violations: Vec<IncrementViolation> = qualifying
        .iter()
        .filter(|&&t| required(t) > fitted_c)
        .map(|&t| IncrementViolation { t, increment: increment(t), bound: base(t) - fitted_c * slack(t) })
        .collect();
    let violation_fraction = if qualifying.is_empty() {
        0.0
    } else {
        violations.len() as f64 / qualifying.len() as f64
    };
    Ok(Lemma2Report { qualifying, fit_until, fitted_c, violations, violation_fraction })
}

fn potential_series(trajectory: &Trajectory, potential: &PotentialFunction) -> Result<Vec<f64>> {
    if potential.values.len() > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            what: "K^N",
            size: potential.values.len() as u128,
            limit: DENSE_LIMIT as u128,
        });
    }
    trajectory.steps.iter().map(|s| potential.expected(&s.frequencies)).collect()
}

pub fn lemma2_monitor(trajectory: &Trajectory, potential: &PotentialFunction, params: &Lemma2Params) -> Result<Lemma2Report> {
    let potentials = potential_series(trajectory, potential)?;
    lemma2_monitor_series(&trajectory.regrets(), &potentials, trajectory.n_agents, params)
}

/// A trajectory segment that leaves `Σ_{Nδ+ε₁}` at `t1`, leaves `Σ_{Nδ+ε₂}` at
/// `t2`, re-enters `Σ_{Nδ+ε₂}` at `t2p` and re-enters `Σ_{Nδ+ε₁}` at `t1p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionRecord {
    pub t1: usize,
    pub t2: usize,
    pub t2p: usize,
    pub t1p: usize,
    pub eps1: f64,
    pub eps2: f64,
    /// `u(f_{t1p}) − u(f_{t1})`, when potentials were supplied.
    pub potential_gain: Option<f64>,
    /// `Σ_{t=t2}^{t2p−1} 2ε₂/(3(t+1))`.
    pub bound: f64,
}

impl ExcursionRecord {
    pub fn gain_meets_bound(&self) -> Option<bool> {
        self.potential_gain.map(|g| g >= self.bound)
    }
}

/// Scans a regret series for excursions. `regrets[t − 1]` belongs to step `t`;
/// `f_t ∈ Σ_x` iff its regret is at most `x`.
pub fn detect_excursions(
    regrets: &[f64],
    potentials: Option<&[f64]>,
    n_agents: usize,
    eps1: f64,
    eps2: f64,
    delta: f64,
) -> Result<Vec<ExcursionRecord>> {
    if !(0.0 < eps1 && eps1 < eps2) {
        return Err(Error::InvalidParameter(format!("need 0 < eps1 < eps2, got {eps1}, {eps2}")));
    }
    if potentials.is_some_and(|p| p.len() != regrets.len()) {
        return Err(Error::DimensionMismatch("potential series length differs".into()));
    }
    let inner = n_agents as f64 * delta + eps1;
    let outer = n_agents as f64 * delta + eps2;
    let h = regrets.len();
    let r = |t: usize| regrets[t - 1];
    let mut records = Vec::new();
    let mut t = 2;
    while t <= h {
        if !(r(t) > inner && r(t - 1) <= inner) {
            t += 1;
            continue;
        }
        let t1 = t;
        let Some(t1p) = ((t1 + 1)..=h).find(|&s| r(s) <= inner) else {
            break;
        };
        let mut s = t1;
        while s < t1p {
            if r(s) > outer && r(s - 1) <= outer {
                let t2 = s;
                let t2p = ((t2 + 1)..=t1p).find(|&v| r(v) <= outer).expect("inner re-entry implies outer re-entry");
                let bound = (t2..t2p).map(|u| 2.0 * eps2 / (3.0 * (u + 1) as f64)).sum();
                records.push(ExcursionRecord {
                    t1,
                    t2,
                    t2p,
                    t1p,
                    eps1,
                    eps2,
                    potential_gain: potentials.map(|p| p[t1p - 1] - p[t1 - 1]),
                    bound,
                });
                s = t2p;
            } else {
                s += 1;
            }
        }
        t = t1p + 1;
    }
    Ok(records)
}

pub fn detect_excursions_in(
    trajectory: &Trajectory,
    potential: Option<&PotentialFunction>,
    eps1: f64,
    eps2: f64,
    delta: f64,
) -> Result<Vec<ExcursionRecord>> {
    let potentials = potential.map(|p| potential_series(trajectory, p)).transpose()?;
    detect_excursions(&trajectory.regrets(), potentials.as_deref(), trajectory.n_agents, eps1, eps2, delta)
}

/// One sampled joint profile used to estimate `q(α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QSample {
    pub regret: f64,
    pub nearest_distance: f64,
    /// Equilibria within `d*/4`; `None` when `d*` is undefined.
    pub owners_within_quarter: Option<usize>,
}

/// Samples approximate equilibria to lower-estimate
/// `q(α) = max_{σ ∈ Σ_α} min_m ‖σ − σ*(m)‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QSampler {
    samples: Vec<QSample>,
    d_star: Option<f64>,
}

fn dirichlet_one(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Disjointness of the sampled α-equilibria around the different equilibria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disjointness {
    pub alpha: f64,
    pub kept: usize,
    /// Kept samples within `d*/4` of exactly one equilibrium.
    pub single_owner: usize,
}

impl Disjointness {
    pub fn holds(&self) -> bool {
        self.kept == self.single_owner
    }
}

impl QSampler {
    /// Draws every pure profile (when `K^N` is small), `n_samples` independent
    /// uniform-Dirichlet product profiles, and `n_samples / 2` jittered copies
    /// of the equilibria.
    pub fn draw(oracle: &dyn UtilityOracle, atlas: &EquilibriumAtlas, n_samples: usize, seed: u64) -> Result<Self> {
        let (n, k) = (oracle.n_agents(), oracle.n_actions());
        if atlas.n_agents != n || atlas.n_actions != k {
            return Err(Error::DimensionMismatch("atlas does not match the game".into()));
        }
        let mut rng = seed::rng_from(seed);
        let mut profiles: Vec<Vec<MixedStrategy>> = Vec::new();
        if let Some(size) = profile_count(n, k).filter(|&s| s <= DENSE_LIMIT) {
            for idx in 0..size {
                profiles.push(profile_at(idx, n, k).into_iter().map(|a| MixedStrategy::pure(a, k)).collect());
            }
        }
        for _ in 0..n_samples {
            profiles.push((0..n).map(|_| MixedStrategy::from_raw(dirichlet_one(k, &mut rng))).collect());
        }
        for s in 0..n_samples / 2 {
            let center: PureProfile = match atlas.set() {
                EquilibriumSet::Listed(list) => list[s % list.len()].clone(),
                EquilibriumSet::OneToOne => {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(&mut rng);
                    p
                }
            };
            let lambda = 10f64.powf(rng.random_range(-4.0..-0.3));
            profiles.push(
                center
                    .iter()
                    .map(|&a| {
                        let noise = dirichlet_one(k, &mut rng);
                        let probs = (0..k)
                            .map(|j| (1.0 - lambda) * f64::from(u8::from(j == a)) + lambda * noise[j])
                            .collect();
                        MixedStrategy::from_raw(probs)
                    })
                    .collect(),
            );
        }
        let d_star = atlas.d_star();
        let samples = profiles
            .iter()
            .map(|p| {
                let regret = regret_of(oracle, p)?.overall;
                let (_, nearest_distance) = atlas.nearest(p);
                let owners_within_quarter = d_star.map(|d| atlas.count_within(p, d / 4.0));
                Ok(QSample { regret, nearest_distance, owners_within_quarter })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples, d_star })
    }

    pub fn samples(&self) -> &[QSample] {
        &self.samples
    }

    /// Sampled `q(α)`; zero when no sample lies in `Σ_α`.
    pub fn q(&self, alpha: f64) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.regret <= alpha + SET_TOL)
            .map(|s| s.nearest_distance)
            .fold(0.0, f64::max)
    }

    /// `(α, q(α))` on a sorted grid, made weakly increasing by a running max.
    pub fn curve(&self, alphas: &[f64]) -> Vec<(f64, f64)> {
        let mut grid = alphas.to_vec();
        grid.sort_by(f64::total_cmp);
        let mut running = 0.0_f64;
        grid.into_iter()
            .map(|a| {
                running = running.max(self.q(a));
                (a, running)
            })
            .collect()
    }

    pub fn disjointness(&self, alpha: f64) -> Option<Disjointness> {
        self.d_star?;
        let kept: Vec<&QSample> = self.samples.iter().filter(|s| s.regret <= alpha + SET_TOL).collect();
        Some(Disjointness {
            alpha,
            kept: kept.len(),
            single_owner: kept.iter().filter(|s| s.owners_within_quarter == Some(1)).count(),
        })
    }
}

/// Randomized lower estimate of `q(α)`.
pub fn estimate_q(
    oracle: &dyn UtilityOracle,
    atlas: &EquilibriumAtlas,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} must be nonnegative")));
    }
    Ok(QSampler::draw(oracle, atlas, n_samples, seed)?.q(alpha))
}

/// `N·√K·max|table|`, a Lipschitz constant of the multilinear extension of a
/// table on product profiles in the concatenated Euclidean norm.
pub fn lipschitz_constant(n_agents: usize, n_actions: usize, max_abs: f64) -> f64 {
    n_agents as f64 * (n_actions as f64).sqrt() * max_abs
}

/// Bound over all agents' expected utilities of `game`.
pub fn lipschitz_bound(game: &NormalFormGame) -> f64 {
    lipschitz_constant(game.n_agents(), game.n_actions(), game.max_abs_utility())
}

pub fn potential_lipschitz_bound(potential: &PotentialFunction) -> f64 {
    lipschitz_constant(potential.n_agents, potential.n_actions, potential.max_abs())
}

/// One named inequality of the closeness conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; positive when the strict inequality holds.
    pub slack: f64,
    /// `None` when skipped.
    pub passed: Option<bool>,
}

impl InequalityCheck {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, slack: rhs - lhs, passed: Some(lhs < rhs) }
    }

    fn skipped(name: &str) -> Self {
        Self { name: name.into(), lhs: f64::NAN, rhs: f64::NAN, slack: f64::NAN, passed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessReport {
    pub delta: f64,
    pub n_agents: usize,
    pub alpha_bar: f64,
    pub eps_bar: f64,
    pub d_star: Option<f64>,
    pub lipschitz: f64,
    pub q_alpha_bar: f64,
    pub q_inner: f64,
    /// In order: `Nδ < ᾱ/2`, `q(ᾱ) < d*/4`, `Nδ + ε̄ < ᾱ`,
    /// `q(Nδ + ε̄) < (ᾱ − Nδ)·d*/(24·N·L)`.
    pub checks: Vec<InequalityCheck>,
    pub note: Option<String>,
}

impl ClosenessReport {
    /// All non-skipped checks passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }
}

/// Evaluates the closeness conditions with `q` from `sampler`. `δ` is
/// `mpd(game, reference)` and `L` the Lipschitz bound of the reference
/// potential. With a single equilibrium the `d*` checks are vacuous.
pub fn verify_closeness_with(
    game: &NormalFormGame,
    reference: &PotentialFunction,
    atlas: &EquilibriumAtlas,
    sampler: &QSampler,
    alpha_bar: f64,
    eps_bar: f64,
) -> Result<ClosenessReport> {
    let delta = mpd(game, &reference.to_game())?;
    let n = game.n_agents();
    let nf = n as f64;
    let lipschitz = potential_lipschitz_bound(reference);
    let q_alpha_bar = sampler.q(alpha_bar);
    let q_inner = sampler.q(nf * delta + eps_bar);
    let mut checks = vec![InequalityCheck::new("N*delta < alpha_bar/2", nf * delta, alpha_bar / 2.0)];
    let note = match atlas.d_star() {
        Some(d) => {
            checks.push(InequalityCheck::new("q(alpha_bar) < d*/4", q_alpha_bar, d / 4.0));
            checks.push(InequalityCheck::new("N*delta + eps_bar < alpha_bar", nf * delta + eps_bar, alpha_bar));
            let name = "q(N*delta + eps_bar) < (alpha_bar - N*delta)*d*/(24*N*L)";
            if lipschitz > 0.0 {
                checks.push(InequalityCheck::new(name, q_inner, (alpha_bar - nf * delta) * d / (24.0 * nf * lipschitz)));
                None
            } else {
                checks.push(InequalityCheck::skipped(name));
                Some("constant potential (L = 0): last bound undefined".into())
            }
        }
        None => {
            checks.push(InequalityCheck::skipped("q(alpha_bar) < d*/4"));
            checks.push(InequalityCheck::new("N*delta + eps_bar < alpha_bar", nf * delta + eps_bar, alpha_bar));
            checks.push(InequalityCheck::skipped(
                "q(N*delta + eps_bar) < (alpha_bar - N*delta)*d*/(24*N*L)",
            ));
            Some("single equilibrium: disjointness vacuous".into())
        }
    };
    Ok(ClosenessReport {
        delta,
        n_agents: n,
        alpha_bar,
        eps_bar,
        d_star: atlas.d_star(),
        lipschitz,
        q_alpha_bar,
        q_inner,
        checks,
        note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosenessParams {
    pub alpha_bar: f64,
    pub eps_bar: f64,
    pub n_samples: usize,
    pub seed: u64,
}

pub fn verify_closeness(
    game: &NormalFormGame,
    reference: &PotentialFunction,
    atlas: &EquilibriumAtlas,
    params: &ClosenessParams,
) -> Result<ClosenessReport> {
    let sampler = QSampler::draw(game, atlas, params.n_samples, params.seed)?;
    verify_closeness_with(game, reference, atlas, &sampler, params.alpha_bar, params.eps_bar)
}

/// Nearest-equilibrium labels of the steps inside `Σ_threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinReport {
    pub labels: Vec<Option<PureProfile>>,
    /// Steps whose label differs from the previous labeled step.
    pub switch_times: Vec<usize>,
    /// Last step that entered `Σ_threshold` from outside (or step 1).
    pub last_entry: Option<usize>,
    pub switches_after_last_entry: usize,
    /// The single equilibrium the trajectory settled near, if it ends inside
    /// `Σ_threshold` with no switch after the last entry.
    pub verdict: Option<PureProfile>,
}

/// `regrets[t − 1]` and `profiles[t − 1]` belong to step `t`.
pub fn track_basins(
    regrets: &[f64],
    profiles: &[JointMixedProfile],
    atlas: &EquilibriumAtlas,
    threshold: f64,
) -> Result<BasinReport> {
    if regrets.len() != profiles.len() {
        return Err(Error::DimensionMismatch("regret and profile series differ in length".into()));
    }
    let labels: Vec<Option<PureProfile>> = regrets
        .iter()
        .zip(profiles)
        .map(|(&r, f)| (r <= threshold + SET_TOL).then(|| atlas.nearest(f.strategies()).0))
        .collect();
    let mut switch_times = Vec::new();
    let mut last_label: Option<&PureProfile> = None;
    let mut last_entry = None;
    for (idx, label) in labels.iter().enumerate() {
        let Some(l) = label else { continue };
        let t = idx + 1;
        if idx == 0 || labels[idx - 1].is_none() {
            last_entry = Some(t);
        }
        if last_label.is_some_and(|prev| prev != l) {
            switch_times.push(t);
        }
        last_label = Some(l);
    }
    let switches_after_last_entry = last_entry.map_or(0, |e| switch_times.iter().filter(|&&s| s > e).count());
    let ends_inside = labels.last().is_some_and(Option::is_some);
    let verdict = (ends_inside && switches_after_last_entry == 0)
        .then(|| labels.last().cloned().flatten())
        .flatten();
    Ok(BasinReport { labels, switch_times, last_entry, switches_after_last_entry, verdict })
}

pub fn basin_tracker(trajectory: &Trajectory, atlas: &EquilibriumAtlas, threshold: f64) -> Result<BasinReport> {
    basin_tracker_after(trajectory, atlas, threshold, 1)
}

/// [`basin_tracker`] on steps `t ≥ burn_in` only; earlier steps are unlabeled
/// and step `burn_in` counts as an entry when it lies inside the set.
pub fn basin_tracker_after(
    trajectory: &Trajectory,
    atlas: &EquilibriumAtlas,
    threshold: f64,
    burn_in: usize,
) -> Result<BasinReport> {
    let skip = burn_in.max(1) - 1;
    if skip >= trajectory.len() {
        return Err(Error::InvalidParameter(format!(
            "burn-in {burn_in} leaves no steps of a {}-step trajectory",
            trajectory.len()
        )));
    }
    let regrets = trajectory.regrets();
    let profiles = trajectory.frequencies();
    let mut rep = track_basins(&regrets[skip..], &profiles[skip..], atlas, threshold)?;
    let mut labels = vec![None; skip];
    labels.append(&mut rep.labels);
    rep.labels = labels;
    for t in rep.switch_times.iter_mut().chain(rep.last_entry.as_mut()) {
        *t += skip;
    }
    Ok(rep)
}

/// Status of one named assumption check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionFlag {
    pub name: String,
    pub holds: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationCount {
    pub check: String,
    pub count: usize,
    pub steps: Vec<usize>,
}

/// Collected outcome of the theory checks for one game or run set.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TheoryReport {
    pub assumptions: Vec<AssumptionFlag>,
    pub is_potential: Option<bool>,
    pub potential_residual: Option<f64>,
    pub delta: Option<f64>,
    pub n_equilibria: Option<u128>,
    pub d_star: Option<f64>,
    pub closeness: Option<ClosenessReport>,
    pub consensus_c: Option<f64>,
    pub increment_c: Option<f64>,
    pub violations: Vec<ViolationCount>,
    /// `(α, q(α))` samples on a grid.
    pub q_curve: Vec<(f64, f64)>,
    pub final_basin: Option<PureProfile>,
    pub notes: Vec<String>,
}

impl TheoryReport {
    pub fn flag(&mut self, name: &str, holds: Option<bool>, detail: impl Into<String>) {
        self.assumptions.push(AssumptionFlag { name: name.into(), holds, detail: detail.into() });
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.is_potential {
            writeln!(
                f,
                "potential: {} (max residual {:.3e})",
                if p { "yes" } else { "no" },
                self.potential_residual.unwrap_or(0.0)
            )?;
        }
        if let Some(d) = self.delta {
            writeln!(f, "delta (MPD to reference): {d:.6}")?;
        }
        if let Some(m) = self.n_equilibria {
            writeln!(f, "pure NE: {m}")?;
        }
        writeln!(f, "d*: {}", fmt_opt(self.d_star))?;
        for a in &self.assumptions {
            let status = match a.holds {
                Some(true) => "holds",
                Some(false) => "fails",
                None => "skipped",
            };
            writeln!(f, "{}: {status} ({})", a.name, a.detail)?;
        }
        if let Some(c) = &self.closeness {
            writeln!(
                f,
                "closeness: alpha_bar = {:.4}, eps_bar = {:.4}, L = {:.4}, q(alpha_bar) = {:.4}, q(N*delta + eps_bar) = {:.4}",
                c.alpha_bar, c.eps_bar, c.lipschitz, c.q_alpha_bar, c.q_inner
            )?;
            for chk in &c.checks {
                match chk.passed {
                    Some(p) => writeln!(
                        f,
                        "  [{}] {}: {:.6} vs {:.6} (slack {:.6})",
                        if p { "pass" } else { "FAIL" },
                        chk.name,
                        chk.lhs,
                        chk.rhs,
                        chk.slack
                    )?,
                    None => writeln!(f, "  [skip] {}", chk.name)?,
                }
            }
            if let Some(n) = &c.note {
                writeln!(f, "  {n}")?;
            }
        }
        if let Some(c) = self.consensus_c {
            writeln!(f, "consensus C: {c:.6}")?;
        }
        if let Some(c) = self.increment_c {
            writeln!(f, "increment C: {c:.6}")?;
        }
        for v in &self.violations {
            writeln!(f, "violations of {}: {}", v.check, v.count)?;
        }
        if let Some(b) = &self.final_basin {
            writeln!(f, "final basin: {b:?}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfp::{run, Communication, RunConfig};
    use crate::games::{corner_coordination, identity_coordination};

    fn joint(p: &[&[f64]]) -> JointMixedProfile {
        JointMixedProfile::new(p.iter().map(|s| MixedStrategy::new(s.to_vec()).unwrap()).collect()).unwrap()
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn one_to_one_nearest_agrees_with_listing() {
        let listed = EquilibriumAtlas::from_profiles(
            3,
            3,
            vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]],
        )
        .unwrap();
        let perm = EquilibriumAtlas::one_to_one(3).unwrap();
        assert_eq!(listed.d_star(), Some(2.0));
        assert_eq!(perm.count(), 6);
        let f = joint(&[&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.3], &[0.3, 0.3, 0.4]]);
        let (a, da) = listed.nearest(f.strategies());
        let (b, db) = perm.nearest(f.strategies());
        assert_eq!(a, b);
        assert!((da - db).abs() < 1e-12);
    }

    #[test]
    fn fig1_point_examples() {
        let atlas = EquilibriumAtlas::from_game(&identity_coordination(2)).unwrap();
        let uni = JointMixedProfile::uniform(2, 2);
        assert!((avg_ne_distance(uni.strategies(), &atlas) - 0.5f64.sqrt()).abs() < 1e-12);
        let at = JointMixedProfile::pure(&[1, 1], 2);
        assert_eq!(avg_ne_distance(at.strategies(), &atlas), 0.0);
    }

    #[test]
    fn centralized_runs_have_zero_belief_error() {
        let g = identity_coordination(2);
        let traj = run(&g, &Communication::Centralized, &RunConfig { horizon: 20, ..Default::default() }).unwrap();
        let atlas = EquilibriumAtlas::from_game(&g).unwrap();
        let m = fig1_metrics(&traj, &atlas).unwrap();
        assert!(m.avg_belief_error.iter().all(|&e| e == 0.0));
        assert_eq!(m.avg_ne_distance.len(), 20);
    }

    #[test]
    fn empty_atlas_is_rejected() {
        assert!(matches!(EquilibriumAtlas::from_profiles(2, 2, vec![]), Err(Error::Assumption(_))));
    }

    #[test]
    fn excursion_on_hand_built_series() {
        // N = 1, delta = 0: inner 0.1, outer 0.3
        let regrets = [0.05, 0.05, 0.2, 0.4, 0.5, 0.2, 0.15, 0.05, 0.05];
        let pot: Vec<f64> = (0..regrets.len()).map(|t| t as f64).collect();
        let rec = detect_excursions(&regrets, Some(&pot), 1, 0.1, 0.3, 0.0).unwrap();
        assert_eq!(rec.len(), 1);
        let r = &rec[0];
        assert_eq!((r.t1, r.t2, r.t2p, r.t1p), (3, 4, 6, 8));
        assert_eq!(r.potential_gain, Some(5.0));
        let bound = 2.0 * 0.3 / 3.0 * (1.0 / 5.0 + 1.0 / 6.0);
        assert!((r.bound - bound).abs() < 1e-15);

        assert!(detect_excursions(&[0.0; 10], None, 1, 0.1, 0.3, 0.0).unwrap().is_empty());
        assert!(detect_excursions(&regrets, None, 1, 0.3, 0.1, 0.0).is_err());
        // excursion that never returns
        assert!(detect_excursions(&[0.0, 0.5, 0.5], None, 1, 0.1, 0.3, 0.0).unwrap().is_empty());
    }

    #[test]
    fn lemma2_monitor_edge_cases() {
        let params = Lemma2Params { delta: 0.1, eps: 0.1, t_start: 10, fit_until: None };
        assert!(lemma2_monitor_series(&[0.0; 5], &[0.0; 5], 2, &params).is_err());

        let params = Lemma2Params { delta: 0.0, eps: 0.1, t_start: 2, fit_until: None };
        let rep = lemma2_monitor_series(&[0.0; 50], &[0.0; 50], 2, &params).unwrap();
        assert!(rep.qualifying.is_empty() && rep.violations.is_empty());
        assert_eq!(rep.violation_fraction, 0.0);
    }

    #[test]
    fn lemma2_monitor_flags_late_drops() {
        let regrets = vec![1.0; 40];
        let mut pot: Vec<f64> = (0..40).map(|t| (t as f64 + 1.0).ln()).collect();
        pot[30] = pot[29] - 1.0;
        let params = Lemma2Params { delta: 0.0, eps: 0.5, t_start: 5, fit_until: Some(10) };
        let rep = lemma2_monitor_series(&regrets, &pot, 1, &params).unwrap();
        assert_eq!(rep.violations.iter().map(|v| v.t).collect::<Vec<_>>(), vec![30]);
    }

    #[test]
    fn q_sampler_basics() {
        let g = corner_coordination();
        let atlas = EquilibriumAtlas::from_game(&g).unwrap();
        let s = QSampler::draw(&g, &atlas, 2000, 1).unwrap();
        assert_eq!(s.q(0.0), 0.0);
        let curve = s.curve(&[0.2, 0.0, 0.05, 0.1]);
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 <= w[1].0));
        assert!(s.q(0.05) < 0.5);
    }

    #[test]
    fn lipschitz_examples() {
        assert!((lipschitz_bound(&identity_coordination(2)) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let c = NormalFormGame::identical_interest(2, 3, vec![-2.0; 9]).unwrap();
        assert!((lipschitz_bound(&c) - 2.0 * 3f64.sqrt() * 2.0).abs() < 1e-12);
    }

    #[test]
    fn closeness_on_exact_corner_game_passes() {
        let g = corner_coordination();
        let pot = crate::game::check_potential(&g, 1e-9).potential.unwrap();
        let atlas = EquilibriumAtlas::from_game(&g).unwrap();
        let params = ClosenessParams { alpha_bar: 0.05, eps_bar: 1e-4, n_samples: 4000, seed: 2 };
        let rep = verify_closeness(&g, &pot, &atlas, &params).unwrap();
        assert_eq!(rep.delta, 0.0);
        assert!(rep.all_passed(), "{rep:?}");
    }

    #[test]
    fn closeness_fails_first_check_for_large_delta() {
        let g = corner_coordination();
        let mut far = g.clone();
        far.tables_mut()[0][3] = 2.0;
        let pot = crate::game::check_potential(&g, 1e-9).potential.unwrap();
        let atlas = EquilibriumAtlas::from_game(&g).unwrap();
        let params = ClosenessParams { alpha_bar: 0.5, eps_bar: 0.01, n_samples: 200, seed: 2 };
        let rep = verify_closeness(&far, &pot, &atlas, &params).unwrap();
        assert_eq!(rep.checks[0].passed, Some(false));
    }

    #[test]
    fn single_equilibrium_makes_disjointness_vacuous() {
        let g = NormalFormGame::identical_interest(2, 2, vec![1.0, 0.5, 0.5, 0.0]).unwrap();
        let pot = crate::game::check_potential(&g, 1e-9).potential.unwrap();
        let atlas = EquilibriumAtlas::from_game(&g).unwrap();
        assert_eq!(atlas.count(), 1);
        let params = ClosenessParams { alpha_bar: 0.2, eps_bar: 0.01, n_samples: 100, seed: 0 };
        let rep = verify_closeness(&g, &pot, &atlas, &params).unwrap();
        assert_eq!(rep.checks[1].passed, None);
        assert_eq!(rep.checks[3].passed, None);
        assert!(rep.note.is_some());
    }

    #[test]
    fn basin_tracker_examples() {
        let atlas = EquilibriumAtlas::from_game(&identity_coordination(2)).unwrap();
        let at_ne = vec![JointMixedProfile::pure(&[1, 1], 2); 5];
        let rep = track_basins(&[0.0; 5], &at_ne, &atlas, 0.1).unwrap();
        assert_eq!(rep.verdict, Some(vec![1, 1]));
        assert!(rep.switch_times.is_empty());

        let alternating: Vec<JointMixedProfile> =
            (0..6).map(|t| JointMixedProfile::pure(&[t % 2, t % 2], 2)).collect();
        let rep = track_basins(&[0.0; 6], &alternating, &atlas, 0.1).unwrap();
        assert_eq!(rep.switch_times, vec![2, 3, 4, 5, 6]);
        assert_eq!(rep.verdict, None);

        // switches separated by an exit only count before the final entry
        let regrets = [0.0, 0.0, 0.5, 0.0, 0.0];
        let profiles: Vec<JointMixedProfile> = [0, 0, 0, 1, 1]
            .iter()
            .map(|&a| JointMixedProfile::pure(&[a, a], 2))
            .collect();
        let rep = track_basins(&regrets, &profiles, &atlas, 0.1).unwrap();
        assert_eq!(rep.switch_times, vec![4]);
        assert_eq!(rep.last_entry, Some(4));
        assert_eq!(rep.switches_after_last_entry, 0);
        assert_eq!(rep.verdict, Some(vec![1, 1]));
    }

    #[test]
    fn burn_in_hides_early_switches() {
        let g = identity_coordination(2);
        let atlas = EquilibriumAtlas::from_game(&g).unwrap();
        let cfg = RunConfig {
            horizon: 30,
            initial: crate::dfp::InitialRule::Pure { profile: vec![0, 1] },
            ..Default::default()
        };
        let traj = run(&g, &Communication::Centralized, &cfg).unwrap();
        let all = basin_tracker(&traj, &atlas, 0.6).unwrap();
        let late = basin_tracker_after(&traj, &atlas, 0.6, 10).unwrap();
        assert!(late.labels[..9].iter().all(Option::is_none));
        assert!(late.switch_times.iter().all(|&t| t >= 10));
        assert!(late.switch_times.len() <= all.switch_times.len());
        assert!(basin_tracker_after(&traj, &atlas, 0.6, 31).is_err());
    }

    #[test]
    fn consensus_fit_basics() {
        let errs: Vec<f64> = (1..=100).map(|t| (t as f64).ln() / t as f64 * 0.3).collect();
        let fit = fit_consensus_rate(&errs, 10).unwrap();
        assert!((fit.c - 0.3).abs() < 1e-12);
        assert!(fit.holds);
        assert!(fit_consensus_rate(&errs[..5], 10).is_err());
    }
}
