//! Experiment configuration, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dfp::{InitialRule, TieBreak};
use crate::error::{Error, Result};
use crate::game::{profile_count, DENSE_LIMIT};
use crate::games::GeometrySpec;
use crate::netcomm::{Edge, GraphSchedule, ScheduleKind, WeightRule};

/// What is played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Agents pick targets whose positions they learn from noisy signals.
    TargetAssignment(TargetScenario),
    /// A game read from a JSON file, with an optional potential-game reference.
    GameFile {
        path: PathBuf,
        #[serde(default)]
        reference: Option<PathBuf>,
    },
    /// Random potential games perturbed by at most `delta`, one per run.
    DeskSuite {
        #[serde(default = "two")]
        n_agents: usize,
        #[serde(default = "three")]
        n_actions: usize,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn two() -> usize {
    2
}

fn three() -> usize {
    3
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetScenario {
    pub n_agents: usize,
    pub n_targets: usize,
    /// Per-axis standard deviation of one target signal.
    pub noise_std: f64,
    pub signal_cutoff: usize,
    /// Use the same known distance for every pair and no signals.
    pub equal_distance: bool,
    pub distance: f64,
    pub geometry: GeometrySpec,
}

impl Default for TargetScenario {
    fn default() -> Self {
        Self {
            n_agents: 10,
            n_targets: 10,
            noise_std: 0.1_f64.sqrt(),
            signal_cutoff: 10,
            equal_distance: false,
            distance: 1.0,
            geometry: GeometrySpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Every agent sees every frequency; no network.
    Centralized,
    Ring,
    Star,
    Complete,
    Static,
    Periodic,
    Random,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRuleName {
    #[default]
    SelfWeight,
    Metropolis,
    DirectSource,
}

/// One communication setting; every setting is run with the same seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    /// Label used for output directories; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub hub: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<Edge>,
    /// Edge sets cycled with period `edge_sets.len()`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_sets: Vec<Vec<Edge>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(default = "default_self_weight")]
    pub self_weight: f64,
    #[serde(default)]
    pub weight_rule: WeightRuleName,
}

fn default_self_weight() -> f64 {
    0.75
}

impl NetworkConfig {
    pub fn of_kind(kind: NetworkKind) -> Self {
        Self {
            kind,
            name: None,
            hub: 0,
            edges: Vec::new(),
            edge_sets: Vec::new(),
            probability: None,
            self_weight: default_self_weight(),
            weight_rule: WeightRuleName::default(),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            serde_json::to_value(self.kind)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        })
    }

    pub fn is_centralized(&self) -> bool {
        self.kind == NetworkKind::Centralized
    }

    /// The schedule for `n_agents`; `None` for the centralized setting.
    /// `seed` drives random schedules.
    pub fn schedule(&self, n_agents: usize, seed: u64) -> Result<Option<GraphSchedule>> {
        let kind = match self.kind {
            NetworkKind::Centralized => return Ok(None),
            NetworkKind::Ring => ScheduleKind::Ring,
            NetworkKind::Star => ScheduleKind::Star { hub: self.hub },
            NetworkKind::Complete => ScheduleKind::Complete,
            NetworkKind::Static => ScheduleKind::Static { edges: self.edges.clone() },
            NetworkKind::Periodic => ScheduleKind::Periodic { edge_sets: self.edge_sets.clone() },
            NetworkKind::Random => ScheduleKind::Random {
                probability: self
                    .probability
                    .ok_or_else(|| Error::Config("random network needs `probability`".into()))?,
                seed,
            },
        };
        GraphSchedule::new(n_agents, kind).map(Some)
    }

    pub fn weight_rule(&self) -> WeightRule {
        match self.weight_rule {
            WeightRuleName::SelfWeight => WeightRule::SelfWeight { self_weight: self.self_weight },
            WeightRuleName::Metropolis => WeightRule::Metropolis,
            WeightRuleName::DirectSource => WeightRule::DirectSource,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DfpSettings {
    pub horizon: usize,
    pub tiebreak: TieBreak,
    pub initial: InitialRule,
    /// Also run the centralized setting next to the listed networks.
    pub centralized: bool,
    /// Start every belief at the initial frequencies.
    pub lemma1_preset: bool,
    /// Refuse to run on networks that violate the connectivity,
    /// bounded-interval or weight conditions.
    pub strict_assumptions: bool,
}

impl Default for DfpSettings {
    fn default() -> Self {
        Self {
            horizon: 500,
            tiebreak: TieBreak::LowestIndex,
            initial: InitialRule::Uniform,
            centralized: false,
            lemma1_preset: true,
            strict_assumptions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    /// Threshold of the potential-increment monitor; defaults to `2Nδ`
    /// (or `default_eps` when `δ = 0`).
    pub eps: Option<f64>,
    pub default_eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Overrides `δ`. Otherwise the desk suite uses its generator bound and a
    /// game file its measured distance to the reference.
    pub delta: Option<f64>,
    /// First step at which the monitors and the basin tracker look at the run.
    pub burn_in: usize,
    /// First step of the consensus-rate window.
    pub consensus_from: usize,
    /// Number of final steps over which the assignment must stay one-to-one.
    pub tail: usize,
    pub alpha_bar: f64,
    pub eps_bar: f64,
    pub q_samples: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            eps: None,
            default_eps: 0.05,
            eps1: 0.05,
            eps2: 0.1,
            delta: None,
            burn_in: 100,
            consensus_from: 10,
            tail: 50,
            alpha_bar: 0.1,
            eps_bar: 0.01,
            q_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Replication {
    pub n_runs: usize,
    pub master_seed: u64,
}

impl Default for Replication {
    fn default() -> Self {
        Self { n_runs: 20, master_seed: 7 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
}

fn default_networks() -> Vec<NetworkConfig> {
    vec![NetworkConfig::of_kind(NetworkKind::Ring), NetworkConfig::of_kind(NetworkKind::Star)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_networks", rename = "network")]
    pub networks: Vec<NetworkConfig>,
    #[serde(default)]
    pub dfp: DfpSettings,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default)]
    pub replication: Replication,
    #[serde(default)]
    pub output: OutputSettings,
}

impl ExperimentConfig {
    /// Target assignment with 10 agents and 10 targets, 20 runs on a ring and a
    /// star, horizon 500.
    pub fn fig1_preset() -> Self {
        Self {
            scenario: Scenario::TargetAssignment(TargetScenario::default()),
            networks: default_networks(),
            dfp: DfpSettings::default(),
            analysis: AnalysisSettings::default(),
            replication: Replication::default(),
            output: OutputSettings::default(),
        }
    }

    /// Perturbed random 2-player, 3-action potential games with `δ = 0.05`,
    /// run centralized and on a two-agent network for 2000 steps.
    pub fn desk_suite_preset() -> Self {
        Self {
            scenario: Scenario::DeskSuite { n_agents: 2, n_actions: 3, delta: 0.05 },
            networks: vec![NetworkConfig::of_kind(NetworkKind::Complete)],
            dfp: DfpSettings { horizon: 2000, centralized: true, ..DfpSettings::default() },
            analysis: AnalysisSettings::default(),
            replication: Replication::default(),
            output: OutputSettings::default(),
        }
    }

    /// Parses TOML; relative game paths are resolved against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(base), Scenario::GameFile { path, reference }) = (base, &mut cfg.scenario) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if let Some(r) = reference.as_mut().filter(|r| r.is_relative()) {
                *r = base.join(&*r);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The communication settings in run order: centralized first when
    /// requested, then the listed networks.
    pub fn variants(&self) -> Vec<NetworkConfig> {
        let mut out = Vec::new();
        if self.dfp.centralized && !self.networks.iter().any(NetworkConfig::is_centralized) {
            out.push(NetworkConfig::of_kind(NetworkKind::Centralized));
        }
        out.extend(self.networks.iter().cloned());
        out
    }

    pub fn n_agents(&self) -> Option<usize> {
        match &self.scenario {
            Scenario::TargetAssignment(s) => Some(s.n_agents),
            Scenario::DeskSuite { n_agents, .. } => Some(*n_agents),
            Scenario::GameFile { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dfp.horizon == 0 {
            return bad("dfp.horizon must be at least 1".into());
        }
        if self.replication.n_runs == 0 {
            return bad("replication.n_runs must be at least 1".into());
        }
        match &self.scenario {
            Scenario::TargetAssignment(s) => {
                if s.n_agents == 0 || s.n_targets == 0 {
                    return bad("target assignment needs agents and targets".into());
                }
                if !(s.noise_std >= 0.0 && s.noise_std.is_finite()) {
                    return bad(format!("noise_std {} must be finite and nonnegative", s.noise_std));
                }
                if s.signal_cutoff == 0 {
                    return bad("signal_cutoff must be at least 1".into());
                }
                if s.equal_distance && !(s.distance > 0.0 && s.distance.is_finite()) {
                    return bad(format!("distance {} must be positive", s.distance));
                }
                if !(s.geometry.agent_position_std >= 0.0 && s.geometry.target_radius > 0.0) {
                    return bad("invalid geometry".into());
                }
            }
            Scenario::GameFile { path, reference } => {
                for p in std::iter::once(path).chain(reference) {
                    if !p.exists() {
                        return bad(format!("game file {} not found", p.display()));
                    }
                }
            }
            Scenario::DeskSuite { n_agents, n_actions, delta } => {
                if *n_agents < 2 || *n_actions < 1 {
                    return bad("desk suite needs at least 2 agents and 1 action".into());
                }
                if profile_count(*n_agents, *n_actions).is_none_or(|s| s > DENSE_LIMIT) {
                    return bad(format!("desk suite limited to K^N <= {DENSE_LIMIT}"));
                }
                if !(*delta >= 0.0 && delta.is_finite()) {
                    return bad(format!("delta {delta} must be finite and nonnegative"));
                }
            }
        }
        let a = &self.analysis;
        if !(0.0 < a.eps1 && a.eps1 < a.eps2) {
            return bad(format!("need 0 < eps1 < eps2, got {} and {}", a.eps1, a.eps2));
        }
        if a.eps.is_some_and(|e| !(e > 0.0)) || !(a.default_eps > 0.0) {
            return bad("eps must be positive".into());
        }
        if a.delta.is_some_and(|d| !(d >= 0.0)) {
            return bad("delta must be nonnegative".into());
        }
        let variants = self.variants();
        if variants.is_empty() {
            return bad("no network and no centralized run requested".into());
        }
        let mut names = BTreeSet::new();
        for v in &variants {
            let label = v.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return bad(format!("invalid network name {label:?}"));
            }
            if !names.insert(label.clone()) {
                return bad(format!("duplicate network name {label:?}; set `name`"));
            }
            if let Some(n) = self.n_agents() {
                if let Some(schedule) = v.schedule(n, 0)? {
                    crate::netcomm::build_weights(&schedule, v.weight_rule(), 1)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips_through_toml() {
        let cfg = ExperimentConfig::fig1_preset();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, None).unwrap(), cfg);
        let desk = ExperimentConfig::desk_suite_preset();
        let text = desk.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, None).unwrap(), desk);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[scenario]\nkind = \"target_assignment\"\n", None).unwrap();
        assert_eq!(cfg, ExperimentConfig::fig1_preset());
        let names: Vec<String> = cfg.variants().iter().map(NetworkConfig::label).collect();
        assert_eq!(names, ["ring", "star"]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let base = "[scenario]\nkind = \"target_assignment\"\n";
        for extra in [
            "[dfp]\nhorizon = 0\n",
            "[replication]\nn_runs = 0\n",
            "[analysis]\neps1 = 0.2\neps2 = 0.1\n",
            "[[network]]\nkind = \"star\"\nhub = 12\n",
            "[[network]]\nkind = \"ring\"\n[[network]]\nkind = \"ring\"\n",
            "[[network]]\nkind = \"random\"\n",
            "[unknown]\nx = 1\n",
        ] {
            let text = format!("{base}{extra}");
            assert!(ExperimentConfig::from_toml_str(&text, None).is_err(), "{extra}");
        }
        assert!(ExperimentConfig::from_toml_str("[scenario]\nkind = \"nope\"\n", None).is_err());
    }
}
