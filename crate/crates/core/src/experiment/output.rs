//! Files written by a simulation and the re-analysis of stored runs.
//!
//! Layout of an output directory:
//!
//! ```text
//! metadata.json
//! chart_ne_distance.svg        (when an equilibrium set is known)
//! chart_estimation_error.svg
//! q_curve.csv                  (game-file scenarios)
//! <network>/run_000.csv ...    one trajectory per run
//! <network>/aggregate.csv      per-step means across runs
//! <network>/summary.csv        one row per run
//! <network>/theory.json        one report per run
//! <network>/theory.txt
//! ```

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{self, ConsensusFit};
use crate::dfp::TRAJECTORY_CSV_VERSION;
use crate::error::{Error, Result};
use crate::games::is_one_to_one;

use super::chart::{line_chart, Series};
use super::config::{ExperimentConfig, Scenario};
use super::runner::{ExperimentResult, RunSummary};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const NE_CHART_FILE: &str = "chart_ne_distance.svg";
pub const ERROR_CHART_FILE: &str = "chart_estimation_error.svg";
pub const Q_CURVE_FILE: &str = "q_curve.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";

pub fn run_file_name(run: usize) -> String {
    format!("run_{run:03}.csv")
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn profile_field(p: &[usize]) -> String {
    p.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn aggregate_csv(result: &super::runner::VariantResult) -> String {
    let agg = &result.aggregate;
    let mut out = format!(
        "# nearpot-dfp aggregate v{TRAJECTORY_CSV_VERSION} runs={} network={}\n",
        agg.runs, result.name
    );
    out.push_str("t,avg_ne_distance,avg_belief_error,max_belief_error,max_regret\n");
    for t in 0..agg.avg_belief_error.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t + 1,
            opt(&agg.avg_ne_distance.as_ref().map(|d| d[t])),
            agg.avg_belief_error[t],
            agg.max_belief_error[t],
            agg.max_regret[t]
        );
    }
    out
}

pub fn summary_csv(rows: &[&RunSummary]) -> String {
    let mut out = format!("# nearpot-dfp summary v{TRAJECTORY_CSV_VERSION}\n");
    out.push_str(
        "run,network,final_profile,one_to_one,final_avg_ne_distance,basin_verdict,basin_switches_after_entry,\
         step_size_violations,consensus_c,consensus_holds,lemma2_qualifying,lemma2_violations,excursion_failures,assumptions\n",
    );
    for r in rows {
        let flags: Vec<String> = r
            .assumptions
            .iter()
            .map(|f| {
                let v = match f.holds {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "skipped",
                };
                format!("{}={v}", f.name.replace(' ', "_"))
            })
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.run,
            r.network,
            profile_field(&r.final_profile),
            opt(&r.one_to_one),
            opt(&r.final_avg_ne_distance),
            r.basin_verdict.as_deref().map(profile_field).unwrap_or_default(),
            opt(&r.basin_switches_after_entry),
            r.step_size_violations,
            opt(&r.consensus_c),
            opt(&r.consensus_holds),
            opt(&r.lemma2_qualifying),
            opt(&r.lemma2_violations),
            opt(&r.excursion_failures),
            flags.join(";")
        );
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    tool: String,
    version: String,
    csv_version: u32,
    scenario: String,
    horizon: usize,
    horizon_note: String,
    norm: String,
    seed_streams: Vec<String>,
    networks: Vec<String>,
    config: ExperimentConfig,
}

fn scenario_name(s: &Scenario) -> &'static str {
    match s {
        Scenario::TargetAssignment(_) => "target_assignment",
        Scenario::GameFile { .. } => "game_file",
        Scenario::DeskSuite { .. } => "desk_suite",
    }
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes all artifacts of `result` under `dir`. Output bytes depend only on
/// the configuration.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let cfg = &result.config;
    for v in &result.variants {
        let vdir = dir.join(&v.name);
        fs::create_dir_all(&vdir)?;
        for r in &v.runs {
            write(vdir.join(run_file_name(r.summary.run)), &r.trajectory.to_csv(r.avg_ne_distance.as_deref()))?;
        }
        write(vdir.join(AGGREGATE_FILE), &aggregate_csv(v))?;
        write(vdir.join(SUMMARY_FILE), &summary_csv(&v.runs.iter().map(|r| &r.summary).collect::<Vec<_>>()))?;
        let reports: Vec<_> = v.runs.iter().map(|r| &r.theory).collect();
        write(vdir.join("theory.json"), &(serde_json::to_string_pretty(&reports).map_err(json_err)? + "\n"))?;
        let mut text = String::new();
        for r in &v.runs {
            let _ = writeln!(text, "== run {} ({}) ==\n{}", r.summary.run, v.name, r.theory);
        }
        write(vdir.join("theory.txt"), &text)?;
    }

    if let Some(fixed) = &result.fixed_game {
        if let Some(atlas) = &fixed.atlas {
            let a = &cfg.analysis;
            let sampler = analysis::QSampler::draw(
                &fixed.reference,
                atlas,
                a.q_samples,
                crate::seed::stream_seed(cfg.replication.master_seed, 0, crate::seed::Stream::Sampling),
            )?;
            let grid: Vec<f64> = (0..=20).map(|i| 2.0 * a.alpha_bar * i as f64 / 20.0).collect();
            write(dir.join(Q_CURVE_FILE), &q_curve_csv(&sampler.curve(&grid), a.q_samples))?;
        }
    }

    let ne: Vec<Series> = result
        .variants
        .iter()
        .filter_map(|v| v.aggregate.avg_ne_distance.as_ref().map(|d| Series::over_steps(&v.name, d)))
        .collect();
    if !ne.is_empty() {
        write(
            dir.join(NE_CHART_FILE),
            &line_chart("Average distance to Nash equilibrium", "t", "(1/N) sum_i |f_i,t - sigma*_i|", &ne),
        )?;
    }
    let err: Vec<Series> = result
        .variants
        .iter()
        .map(|v| Series::over_steps(&v.name, &v.aggregate.avg_belief_error))
        .collect();
    write(dir.join(ERROR_CHART_FILE), &line_chart("Average estimation error", "t", "avg belief error", &err))?;

    let meta = Metadata {
        tool: "nearpot-dfp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        csv_version: TRAJECTORY_CSV_VERSION,
        scenario: scenario_name(&cfg.scenario).into(),
        horizon: cfg.dfp.horizon,
        horizon_note: "horizon is a chosen setting; 500 by default for the target-assignment preset".into(),
        norm: "Euclidean on concatenated per-agent probability vectors".into(),
        seed_streams: ["geometry", "signals", "tiebreak", "game", "perturbation", "network", "sampling"]
            .map(String::from)
            .to_vec(),
        networks: result.variants.iter().map(|v| v.name.clone()).collect(),
        config: cfg.clone(),
    };
    write(dir.join(METADATA_FILE), &(serde_json::to_string_pretty(&meta).map_err(json_err)? + "\n"))?;
    Ok(())
}

pub fn q_curve_csv(curve: &[(f64, f64)], samples: usize) -> String {
    let mut out = format!("# nearpot-dfp q-curve v{TRAJECTORY_CSV_VERSION} samples={samples}\nalpha,q\n");
    for (a, q) in curve {
        let _ = writeln!(out, "{a},{q}");
    }
    out
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

/// One trajectory read back from its CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRun {
    pub n_agents: usize,
    pub n_actions: usize,
    pub actions: Vec<Vec<usize>>,
    pub avg_ne_distance: Option<Vec<f64>>,
    pub avg_belief_error: Vec<f64>,
    pub max_belief_error: Vec<f64>,
    pub max_regret: Vec<f64>,
}

fn header_value(line: &str, key: &str) -> Result<usize> {
    line.split_whitespace()
        .find_map(|w| w.strip_prefix(&format!("{key}=")))
        .ok_or_else(|| Error::Parse(format!("missing {key} in header {line:?}")))?
        .parse()
        .map_err(|e| Error::Parse(format!("{key}: {e}")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Parses a trajectory CSV written by [`crate::dfp::Trajectory::to_csv`].
pub fn read_run_csv(text: &str) -> Result<StoredRun> {
    let first = text.lines().next().unwrap_or_default();
    let expected = format!("# nearpot-dfp trajectory v{TRAJECTORY_CSV_VERSION}");
    if !first.starts_with(&expected) {
        return Err(Error::Parse(format!("not a v{TRAJECTORY_CSV_VERSION} trajectory file: {first:?}")));
    }
    let n_agents = header_value(first, "n_agents")?;
    let n_actions = header_value(first, "n_actions")?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name}")))
    };
    let action_cols: Vec<usize> = (0..n_agents).map(|i| col(&format!("action_{i}"))).collect::<Result<_>>()?;
    let (c_ne, c_avg, c_max) = (col("avg_ne_distance")?, col("avg_belief_error")?, col("max_belief_error")?);
    let regret_cols: Vec<usize> = (0..n_agents).map(|i| col(&format!("regret_{i}"))).collect::<Result<_>>()?;
    let mut run = StoredRun {
        n_agents,
        n_actions,
        actions: Vec::new(),
        avg_ne_distance: Some(Vec::new()),
        avg_belief_error: Vec::new(),
        max_belief_error: Vec::new(),
        max_regret: Vec::new(),
    };
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let actions = action_cols
            .iter()
            .map(|&c| rec[c].parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if actions.iter().any(|&a| a >= n_actions) {
            return Err(Error::Parse(format!("action out of range in row {:?}", rec.position())));
        }
        run.actions.push(actions);
        if rec[c_ne].is_empty() {
            run.avg_ne_distance = None;
        } else if let Some(d) = run.avg_ne_distance.as_mut() {
            d.push(parse_f64(&rec[c_ne])?);
        }
        run.avg_belief_error.push(parse_f64(&rec[c_avg])?);
        run.max_belief_error.push(parse_f64(&rec[c_max])?);
        run.max_regret.push(
            regret_cols
                .iter()
                .map(|&c| parse_f64(&rec[c]))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max),
        );
    }
    if run.actions.is_empty() {
        return Err(Error::Parse("trajectory file has no rows".into()));
    }
    Ok(run)
}

impl StoredRun {
    /// `max_t ‖f_t − f_{t−1}‖ / (2N/t)` and the violating steps, with the
    /// frequencies rebuilt from the actions. Step 1 is exempt: it needs `f_0`,
    /// and `‖f_1 − f_0‖ ≤ √(2N) ≤ 2N` anyway.
    pub fn step_size_violations(&self) -> Vec<usize> {
        let (n, k) = (self.n_agents, self.n_actions);
        let mut f = vec![vec![0.0; k]; n];
        let mut out = Vec::new();
        for (idx, acts) in self.actions.iter().enumerate() {
            let t = idx + 1;
            let mut d2 = 0.0;
            for (fi, &a) in f.iter_mut().zip(acts) {
                for (j, x) in fi.iter_mut().enumerate() {
                    let e = if j == a { 1.0 } else { 0.0 };
                    let new = if t == 1 { e } else { *x + (e - *x) / t as f64 };
                    d2 += (new - *x) * (new - *x);
                    *x = new;
                }
            }
            if t > 1 && d2.sqrt() > 2.0 * n as f64 / t as f64 {
                out.push(t);
            }
        }
        out
    }
}

/// Re-analysis of one stored communication setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoredVariant {
    pub name: String,
    pub runs: usize,
    /// Runs whose final `tail` action profiles are all one-to-one (target
    /// assignment only).
    pub one_to_one_runs: Option<usize>,
    pub consensus: Vec<ConsensusFit>,
    pub step_size_violations: usize,
    /// `aggregate.csv` equals the mean of the run files to 1e-12.
    pub aggregate_consistent: bool,
    pub aggregate_avg_belief_error: Vec<f64>,
    pub aggregate_avg_ne_distance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoredAnalysis {
    pub variants: Vec<StoredVariant>,
    /// Fraction of steps `t ≥ consensus_from` with the star's mean estimation
    /// error at most the ring's, when both were run.
    pub star_at_or_below_ring: Option<f64>,
}

impl StoredAnalysis {
    pub fn variant(&self, name: &str) -> Option<&StoredVariant> {
        self.variants.iter().find(|v| v.name == name)
    }
}

impl fmt::Display for StoredAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.variants {
            writeln!(f, "[{}] runs: {}", v.name, v.runs)?;
            if let Some(k) = v.one_to_one_runs {
                writeln!(f, "  one-to-one at the end: {k}/{}", v.runs)?;
            }
            let held = v.consensus.iter().filter(|c| c.holds).count();
            let cmax = v.consensus.iter().map(|c| c.c).fold(0.0, f64::max);
            writeln!(f, "  consensus rate fit holds: {held}/{} (max C {cmax:.4})", v.consensus.len())?;
            writeln!(f, "  step-size violations: {}", v.step_size_violations)?;
            writeln!(f, "  aggregate consistent: {}", v.aggregate_consistent)?;
            if let Some(e) = v.aggregate_avg_belief_error.last() {
                writeln!(f, "  final mean estimation error: {e:.6}")?;
            }
            if let Some(d) = v.aggregate_avg_ne_distance.as_ref().and_then(|d| d.last()) {
                writeln!(f, "  final mean distance to equilibrium: {d:.6}")?;
            }
        }
        if let Some(p) = self.star_at_or_below_ring {
            writeln!(f, "star error <= ring error at {:.1}% of steps", 100.0 * p)?;
        }
        Ok(())
    }
}

fn read_aggregate(path: &Path) -> Result<(Vec<Option<f64>>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut ne = Vec::new();
    let mut err = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        ne.push(if rec[1].is_empty() { None } else { Some(parse_f64(&rec[1])?) });
        err.push(parse_f64(&rec[2])?);
    }
    Ok((ne, err))
}

fn mean_of(columns: &[&Vec<f64>]) -> Vec<f64> {
    let len = columns.first().map_or(0, |c| c.len());
    (0..len)
        .map(|t| columns.iter().map(|c| c[t]).sum::<f64>() / columns.len() as f64)
        .collect()
}

/// Recomputes the run checks from the files under `dir`.
pub fn analyze_dir(dir: &Path) -> Result<StoredAnalysis> {
    let meta: Metadata = serde_json::from_str(&fs::read_to_string(dir.join(METADATA_FILE))?).map_err(json_err)?;
    let cfg = &meta.config;
    let target = matches!(cfg.scenario, Scenario::TargetAssignment(_));
    let mut variants = Vec::new();
    for name in &meta.networks {
        let vdir = dir.join(name);
        let mut files: Vec<PathBuf> = fs::read_dir(&vdir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("run_") && n.ends_with(".csv"))
            })
            .collect();
        files.sort();
        let runs = files
            .iter()
            .map(|p| read_run_csv(&fs::read_to_string(p)?))
            .collect::<Result<Vec<_>>>()?;
        if runs.is_empty() {
            return Err(Error::Parse(format!("no run files in {}", vdir.display())));
        }
        let tail = cfg.analysis.tail.max(1);
        let one_to_one_runs = target.then(|| {
            runs.iter()
                .filter(|r| r.actions[r.actions.len().saturating_sub(tail)..].iter().all(|a| is_one_to_one(a)))
                .count()
        });
        let from = cfg.analysis.consensus_from;
        let consensus = runs
            .iter()
            .filter(|r| r.max_belief_error.len() >= from.max(2))
            .map(|r| analysis::fit_consensus_rate(&r.max_belief_error, from))
            .collect::<Result<Vec<_>>>()?;
        let step_size_violations = runs.iter().map(|r| r.step_size_violations().len()).sum();
        let err_mean = mean_of(&runs.iter().map(|r| &r.avg_belief_error).collect::<Vec<_>>());
        let ne_cols: Option<Vec<&Vec<f64>>> = runs.iter().map(|r| r.avg_ne_distance.as_ref()).collect();
        let ne_mean = ne_cols.map(|c| mean_of(&c));
        let (stored_ne, stored_err) = read_aggregate(&vdir.join(AGGREGATE_FILE))?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let aggregate_consistent = stored_err.len() == err_mean.len()
            && stored_err.iter().zip(&err_mean).all(|(&a, &b)| close(a, b))
            && match &ne_mean {
                Some(m) => stored_ne.iter().zip(m).all(|(a, &b)| a.is_some_and(|a| close(a, b))),
                None => stored_ne.iter().all(Option::is_none),
            };
        variants.push(StoredVariant {
            name: name.clone(),
            runs: runs.len(),
            one_to_one_runs,
            consensus,
            step_size_violations,
            aggregate_consistent,
            aggregate_avg_belief_error: err_mean,
            aggregate_avg_ne_distance: ne_mean,
        });
    }
    let star_at_or_below_ring = {
        let find = |n: &str| variants.iter().find(|v| v.name == n);
        match (find("star"), find("ring")) {
            (Some(s), Some(r)) => {
                star_fraction(&s.aggregate_avg_belief_error, &r.aggregate_avg_belief_error, cfg.analysis.consensus_from)
            }
            _ => None,
        }
    };
    let out = StoredAnalysis { variants, star_at_or_below_ring };
    write(dir.join(ANALYSIS_FILE), &(serde_json::to_string_pretty(&out).map_err(json_err)? + "\n"))?;
    Ok(out)
}

/// Fraction of steps `t ∈ [from, horizon]` where `star[t] ≤ ring[t]`.
pub fn star_fraction(star: &[f64], ring: &[f64], from: usize) -> Option<f64> {
    let h = star.len().min(ring.len());
    let from = from.max(1);
    if h < from {
        return None;
    }
    let hits = (from..=h).filter(|&t| star[t - 1] <= ring[t - 1]).count();
    Some(hits as f64 / (h - from + 1) as f64)
}
