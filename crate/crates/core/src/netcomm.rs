//! Time-varying communication graphs and belief-averaging weights.
//!
//! Time steps start at 1. Graphs are undirected; an edge `(i, l)` lets both
//! endpoints read each other's local copies during that step's exchange.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dfp::BeliefState;
use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::seed;

pub type Edge = (usize, usize);

/// How the edge set evolves over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Static { edges: Vec<Edge> },
    Ring,
    Star {
        #[serde(default)]
        hub: usize,
    },
    Complete,
    /// `edge_sets[(t - 1) % period]` is active at step `t`.
    Periodic { edge_sets: Vec<Vec<Edge>> },
    /// Each pair is linked independently with `probability` at every step.
    Random { probability: f64, seed: u64 },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Static { .. } => "static",
            ScheduleKind::Ring => "ring",
            ScheduleKind::Star { .. } => "star",
            ScheduleKind::Complete => "complete",
            ScheduleKind::Periodic { .. } => "periodic",
            ScheduleKind::Random { .. } => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    n_agents: usize,
    kind: ScheduleKind,
}

fn normalize(edges: &[Edge], n_agents: usize) -> Result<Vec<Edge>> {
    let mut set = BTreeSet::new();
    for &(a, b) in edges {
        if a == b {
            return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
        }
        if a >= n_agents || b >= n_agents {
            return Err(Error::IndexOutOfRange { what: "node", index: a.max(b), limit: n_agents });
        }
        set.insert((a.min(b), a.max(b)));
    }
    Ok(set.into_iter().collect())
}

impl GraphSchedule {
    pub fn new(n_agents: usize, kind: ScheduleKind) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidParameter("schedule needs at least one agent".into()));
        }
        let kind = match kind {
            ScheduleKind::Static { edges } => ScheduleKind::Static { edges: normalize(&edges, n_agents)? },
            ScheduleKind::Periodic { edge_sets } => {
                if edge_sets.is_empty() {
                    return Err(Error::InvalidParameter("periodic schedule needs at least one edge set".into()));
                }
                let edge_sets = edge_sets
                    .iter()
                    .map(|s| normalize(s, n_agents))
                    .collect::<Result<Vec<_>>>()?;
                ScheduleKind::Periodic { edge_sets }
            }
            ScheduleKind::Star { hub } if hub >= n_agents => {
                return Err(Error::IndexOutOfRange { what: "hub", index: hub, limit: n_agents });
            }
            ScheduleKind::Random { probability, .. } if !(0.0..=1.0).contains(&probability) => {
                return Err(Error::InvalidParameter(format!("link probability {probability} outside [0, 1]")));
            }
            other => other,
        };
        Ok(Self { n_agents, kind })
    }

    pub fn ring(n_agents: usize) -> Self {
        Self { n_agents, kind: ScheduleKind::Ring }
    }

    pub fn star(n_agents: usize, hub: usize) -> Result<Self> {
        Self::new(n_agents, ScheduleKind::Star { hub })
    }

    pub fn complete(n_agents: usize) -> Self {
        Self { n_agents, kind: ScheduleKind::Complete }
    }

    pub fn static_edges(n_agents: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::new(n_agents, ScheduleKind::Static { edges })
    }

    pub fn periodic(n_agents: usize, edge_sets: Vec<Vec<Edge>>) -> Result<Self> {
        Self::new(n_agents, ScheduleKind::Periodic { edge_sets })
    }

    pub fn random(n_agents: usize, probability: f64, seed: u64) -> Result<Self> {
        Self::new(n_agents, ScheduleKind::Random { probability, seed })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Number of steps after which the edge sequence repeats; `None` for random schedules.
    pub fn period(&self) -> Option<usize> {
        match &self.kind {
            ScheduleKind::Periodic { edge_sets } => Some(edge_sets.len()),
            ScheduleKind::Random { .. } => None,
            _ => Some(1),
        }
    }

    /// Sorted, deduplicated edge set `𝓔_t` with `a < b` in every pair.
    pub fn edges_at(&self, t: usize) -> Vec<Edge> {
        let n = self.n_agents;
        match &self.kind {
            ScheduleKind::Static { edges } => edges.clone(),
            ScheduleKind::Ring => {
                let raw: Vec<Edge> = match n {
                    0 | 1 => Vec::new(),
                    2 => vec![(0, 1)],
                    _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
                };
                normalize(&raw, n).expect("ring edges are valid")
            }
            ScheduleKind::Star { hub } => {
                let mut e: Vec<Edge> = (0..n).filter(|&i| i != *hub).map(|i| (i.min(*hub), i.max(*hub))).collect();
                e.sort_unstable();
                e
            }
            ScheduleKind::Complete => (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect(),
            ScheduleKind::Periodic { edge_sets } => edge_sets[(t.max(1) - 1) % edge_sets.len()].clone(),
            ScheduleKind::Random { probability, seed } => {
                let mut rng = seed::rng_from(seed::combine(*seed, t as u64));
                let mut e = Vec::new();
                for a in 0..n {
                    for b in (a + 1)..n {
                        if rng.random::<f64>() < *probability {
                            e.push((a, b));
                        }
                    }
                }
                e
            }
        }
    }

    /// Sorted neighbor lists `𝓝_{i,t}`.
    pub fn neighbors_at(&self, t: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_agents];
        for (a, b) in self.edges_at(t) {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        adj
    }

    /// Steps whose edges define `𝓔_∞`: one period, or the whole horizon for random schedules.
    fn union_window(&self, horizon: usize) -> usize {
        self.period().unwrap_or(horizon).max(1)
    }
}

/// Result of the connectivity check on `𝓔_∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub connected: bool,
    pub union_edges: Vec<Edge>,
    /// True when `𝓔_∞` was approximated by the union over the inspected horizon.
    pub empirical_over_horizon: bool,
}

/// Whether the graph `(𝓝, 𝓔_∞)` is connected. Periodic and static schedules use
/// the exact union over one period; random schedules use the union over `horizon`.
pub fn check_connectivity(schedule: &GraphSchedule, horizon: usize) -> ConnectivityReport {
    let window = schedule.union_window(horizon);
    let mut union = BTreeSet::new();
    for t in 1..=window {
        union.extend(schedule.edges_at(t));
    }
    let union_edges: Vec<Edge> = union.into_iter().collect();
    ConnectivityReport {
        connected: is_connected(schedule.n_agents, &union_edges),
        union_edges,
        empirical_over_horizon: schedule.period().is_none(),
    }
}

pub fn is_connected(n_agents: usize, edges: &[Edge]) -> bool {
    if n_agents <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n_agents];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n_agents];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Result of the bounded-communication-interval check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub bounded: bool,
    /// Largest gap between consecutive appearances of any `𝓔_∞` edge,
    /// counting the lead-in from step 1 and the tail to `horizon + 1`.
    pub t_b: usize,
    pub empirical_over_horizon: bool,
}

/// Estimates `T_B` from the appearance times of each `𝓔_∞` edge over steps
/// `1..=horizon`. Schedules with period 1 give the exact answer `T_B = 1`.
/// Otherwise the interval is reported bounded only when the window holds at
/// least two full intervals (`2·T_B ≤ horizon`).
pub fn check_bounded_interval(schedule: &GraphSchedule, horizon: usize) -> IntervalReport {
    let union = check_connectivity(schedule, horizon).union_edges;
    if schedule.period() == Some(1) {
        return IntervalReport { bounded: true, t_b: 1, empirical_over_horizon: false };
    }
    let mut last_seen: BTreeMap<Edge, usize> = union.iter().map(|&e| (e, 0)).collect();
    let mut t_b = 1;
    for t in 1..=horizon {
        for e in schedule.edges_at(t) {
            if let Some(last) = last_seen.get_mut(&e) {
                t_b = t_b.max(t - *last);
                *last = t;
            }
        }
    }
    for &last in last_seen.values() {
        t_b = t_b.max(horizon + 1 - last);
    }
    IntervalReport { bounded: 2 * t_b <= horizon, t_b, empirical_over_horizon: true }
}

/// Rule that turns a neighbor set into one row of `W_{j,t}` for `j ≠ i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    /// `self_weight` on the own copy, the rest split evenly over current neighbors.
    SelfWeight { self_weight: f64 },
    /// Metropolis–Hastings weights `1/(1 + max(deg_i, deg_l))`.
    Metropolis,
    /// Copy the tracked agent's own frequency whenever it is a neighbor. With a
    /// complete graph this reproduces centralized fictitious play, but it puts
    /// zero weight on other neighbors.
    DirectSource,
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::SelfWeight { self_weight: 0.75 }
    }
}

/// Row-stochastic averaging weights over a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    schedule: GraphSchedule,
    rule: WeightRule,
    eta: f64,
}

/// Validates the rule and computes `η` as the smallest positive weight over one
/// period (or over `horizon` for random schedules).
pub fn build_weights(schedule: &GraphSchedule, rule: WeightRule, horizon: usize) -> Result<WeightScheme> {
    if let WeightRule::SelfWeight { self_weight } = rule {
        if !(self_weight > 0.0 && self_weight < 1.0) {
            return Err(Error::InvalidParameter(format!("self_weight {self_weight} must lie in (0, 1)")));
        }
    }
    let mut scheme = WeightScheme { schedule: schedule.clone(), rule, eta: 1.0 };
    let mut eta = 1.0_f64;
    let mut row = Vec::new();
    for t in 1..=schedule.union_window(horizon) {
        let nb = schedule.neighbors_at(t);
        for i in 0..schedule.n_agents {
            for j in 0..schedule.n_agents {
                scheme.row_into(i, j, &nb, &mut row);
                for &(_, w) in &row {
                    if w > 0.0 {
                        eta = eta.min(w);
                    }
                }
            }
        }
    }
    scheme.eta = eta;
    Ok(scheme)
}

impl WeightScheme {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn rule(&self) -> WeightRule {
        self.rule
    }

    pub fn schedule(&self) -> &GraphSchedule {
        &self.schedule
    }

    /// Nonzero entries `(l, w^i_{jl,t})` of row `i` of `W_{j,t}`, given the
    /// step's neighbor lists.
    pub fn row_into(&self, i: usize, j: usize, neighbors: &[Vec<usize>], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let own = &neighbors[i];
        if i == j || own.is_empty() {
            out.push((i, 1.0));
            return;
        }
        match self.rule {
            WeightRule::SelfWeight { self_weight } => {
                let w = (1.0 - self_weight) / own.len() as f64;
                out.push((i, self_weight));
                out.extend(own.iter().map(|&l| (l, w)));
            }
            WeightRule::Metropolis => {
                let mut rest = 1.0;
                let mut entries = Vec::with_capacity(own.len());
                for &l in own {
                    let w = 1.0 / (1 + own.len().max(neighbors[l].len())) as f64;
                    rest -= w;
                    entries.push((l, w));
                }
                out.push((i, rest));
                out.extend(entries);
            }
            WeightRule::DirectSource => {
                if own.binary_search(&j).is_ok() {
                    out.push((j, 1.0));
                } else {
                    out.push((i, 1.0));
                }
            }
        }
    }

    /// Dense `W_{j,t}` with `[W]_{i,l} = w^i_{jl,t}`.
    pub fn weights_at(&self, j: usize, t: usize) -> Vec<Vec<f64>> {
        let n = self.schedule.n_agents;
        let nb = self.schedule.neighbors_at(t);
        let mut row = Vec::new();
        (0..n)
            .map(|i| {
                self.row_into(i, j, &nb, &mut row);
                let mut dense = vec![0.0; n];
                for &(l, w) in &row {
                    dense[l] += w;
                }
                dense
            })
            .collect()
    }
}

/// Exhaustive check of the weight conditions over steps `1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightAudit {
    pub row_stochastic: bool,
    pub max_row_error: f64,
    /// Every `l ∈ 𝓝_{i,t} ∪ {i}` carries at least `η`, every other `l` carries 0.
    pub support_respects_eta: bool,
    pub own_row_is_unit: bool,
    pub eta: f64,
}

impl WeightAudit {
    pub fn passed(&self) -> bool {
        self.row_stochastic && self.support_respects_eta && self.own_row_is_unit
    }
}

pub fn audit_weights(scheme: &WeightScheme, horizon: usize) -> WeightAudit {
    let n = scheme.schedule.n_agents;
    let eta = scheme.eta;
    let mut max_row_error = 0.0_f64;
    let mut support_ok = true;
    let mut own_ok = true;
    for t in 1..=horizon.max(1) {
        let nb = scheme.schedule.neighbors_at(t);
        for j in 0..n {
            let w = scheme.weights_at(j, t);
            for (i, row) in w.iter().enumerate() {
                max_row_error = max_row_error.max((row.iter().sum::<f64>() - 1.0).abs());
                if i == j {
                    own_ok &= row[i] == 1.0;
                    continue;
                }
                for (l, &x) in row.iter().enumerate() {
                    let linked = l == i || nb[i].binary_search(&l).is_ok();
                    support_ok &= if linked { x >= eta } else { x == 0.0 };
                }
            }
        }
    }
    WeightAudit {
        row_stochastic: max_row_error <= 1e-12,
        max_row_error,
        support_respects_eta: support_ok,
        own_row_is_unit: own_ok,
        eta,
    }
}

/// One averaging round: `υ^i_{j} ← Σ_l w^i_{jl,t} υ^l_{j}` for every pair.
pub fn belief_update(beliefs: &BeliefState, weights: &WeightScheme, t: usize) -> Result<BeliefState> {
    let n = beliefs.n_agents();
    if n != weights.schedule.n_agents {
        return Err(Error::DimensionMismatch(format!(
            "beliefs cover {n} agents, schedule has {}",
            weights.schedule.n_agents
        )));
    }
    let k = beliefs.n_actions();
    let nb = weights.schedule.neighbors_at(t);
    let mut row = Vec::new();
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let mut out_row = Vec::with_capacity(n);
        for j in 0..n {
            weights.row_into(i, j, &nb, &mut row);
            let mut acc = vec![0.0; k];
            for &(l, w) in &row {
                for (a, p) in acc.iter_mut().zip(beliefs.get(l, j).probs()) {
                    *a += w * p;
                }
            }
            out_row.push(MixedStrategy::from_raw(acc));
        }
        entries.push(out_row);
    }
    Ok(BeliefState::from_raw(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::JointMixedProfile;

    #[test]
    fn ring_and_star_edges() {
        assert_eq!(GraphSchedule::ring(4).edges_at(1), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(GraphSchedule::ring(2).edges_at(1), vec![(0, 1)]);
        assert_eq!(GraphSchedule::star(4, 2).unwrap().edges_at(3), vec![(0, 2), (1, 2), (2, 3)]);
        assert!(GraphSchedule::static_edges(3, vec![(1, 1)]).is_err());
        assert!(GraphSchedule::static_edges(3, vec![(1, 3)]).is_err());
    }

    #[test]
    fn random_schedule_is_deterministic() {
        let s = GraphSchedule::random(6, 0.4, 11).unwrap();
        for t in 1..20 {
            assert_eq!(s.edges_at(t), s.edges_at(t));
        }
        let other = GraphSchedule::random(6, 0.4, 12).unwrap();
        assert!((1..20).any(|t| s.edges_at(t) != other.edges_at(t)));
    }

    #[test]
    fn connectivity_examples() {
        assert!(check_connectivity(&GraphSchedule::ring(5), 10).connected);
        let cliques = GraphSchedule::static_edges(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert!(!check_connectivity(&cliques, 10).connected);
        let alt = GraphSchedule::periodic(3, vec![vec![(0, 1)], vec![(1, 2)]]).unwrap();
        let rep = check_connectivity(&alt, 4);
        assert!(rep.connected);
        assert_eq!(rep.union_edges, vec![(0, 1), (1, 2)]);
        assert!(!rep.empirical_over_horizon);
    }

    #[test]
    fn bounded_interval_examples() {
        let rep = check_bounded_interval(&GraphSchedule::ring(5), 10);
        assert_eq!((rep.bounded, rep.t_b), (true, 1));

        let alt = GraphSchedule::periodic(3, vec![vec![(0, 1)], vec![(1, 2)]]).unwrap();
        let rep = check_bounded_interval(&alt, 20);
        assert_eq!((rep.bounded, rep.t_b), (true, 2));

        let mut sets = vec![vec![]; 10];
        sets[0] = vec![(0, 1)];
        let once = GraphSchedule::periodic(2, sets).unwrap();
        let rep = check_bounded_interval(&once, 10);
        assert!(!rep.bounded);
        assert_eq!(rep.t_b, 10);
    }

    #[test]
    fn self_weight_rule_weights() {
        let ring = GraphSchedule::ring(4);
        let w = build_weights(&ring, WeightRule::SelfWeight { self_weight: 0.75 }, 1).unwrap();
        assert_eq!(w.eta(), 0.125);
        let m = w.weights_at(2, 1);
        assert_eq!(m[0], vec![0.75, 0.125, 0.0, 0.125]);
        assert_eq!(m[2], vec![0.0, 0.0, 1.0, 0.0]);
        for row in &m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(audit_weights(&w, 3).passed());

        let lonely = GraphSchedule::static_edges(3, vec![(0, 1)]).unwrap();
        let w = build_weights(&lonely, WeightRule::default(), 1).unwrap();
        assert_eq!(w.weights_at(0, 1)[2], vec![0.0, 0.0, 1.0]);

        assert!(build_weights(&ring, WeightRule::SelfWeight { self_weight: 1.0 }, 1).is_err());
        assert!(build_weights(&ring, WeightRule::SelfWeight { self_weight: 0.0 }, 1).is_err());
    }

    #[test]
    fn direct_source_fails_support_condition_on_rings() {
        let w = build_weights(&GraphSchedule::ring(4), WeightRule::DirectSource, 1).unwrap();
        let audit = audit_weights(&w, 2);
        assert!(audit.row_stochastic && audit.own_row_is_unit);
        assert!(!audit.support_respects_eta);
    }

    #[test]
    fn metropolis_rows_are_stochastic() {
        let s = GraphSchedule::star(5, 0).unwrap();
        let w = build_weights(&s, WeightRule::Metropolis, 1).unwrap();
        assert!(audit_weights(&w, 1).passed());
    }

    #[test]
    fn belief_update_examples() {
        let s = GraphSchedule::complete(2);
        let w = build_weights(&s, WeightRule::default(), 1).unwrap();
        let e0 = MixedStrategy::pure(0, 2);
        let e1 = MixedStrategy::pure(1, 2);
        let b = BeliefState::new(vec![vec![e0.clone(), e0.clone()], vec![e1.clone(), e1.clone()]]).unwrap();
        let next = belief_update(&b, &w, 1).unwrap();
        assert_eq!(next.get(0, 1).probs(), &[0.75, 0.25]);
        assert_eq!(next.get(0, 0), &e0);
        assert_eq!(next.get(1, 1), &e1);

        // consensus fixed point
        let f = JointMixedProfile::new(vec![
            MixedStrategy::new(vec![0.2, 0.8]).unwrap(),
            MixedStrategy::new(vec![0.6, 0.4]).unwrap(),
        ])
        .unwrap();
        let agreed = BeliefState::from_frequencies(&f);
        let next = belief_update(&agreed, &w, 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(next.get(i, j).distance(&f[j]) < 1e-15);
            }
        }
    }

    #[test]
    fn frozen_frequencies_reach_consensus_geometrically() {
        let n = 6;
        let s = GraphSchedule::ring(n);
        let w = build_weights(&s, WeightRule::default(), 1).unwrap();
        let f = JointMixedProfile::new(
            (0..n)
                .map(|j| MixedStrategy::new(vec![j as f64 / 10.0, 1.0 - j as f64 / 10.0]).unwrap())
                .collect(),
        )
        .unwrap();
        let mut b = BeliefState::uniform(n, 2);
        b.pin_diagonal(&f);
        let mut log_err = Vec::new();
        for t in 1..=60 {
            b = belief_update(&b, &w, t).unwrap();
            log_err.push((t as f64, b.max_error(&f).ln()));
        }
        let m = log_err.len() as f64;
        let (sx, sy) = log_err.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let slope = log_err.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / log_err.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>();
        assert!(slope < -0.01, "slope {slope}");
    }
}
