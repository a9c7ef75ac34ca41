//! Batch experiments and the post-hoc trace audit.
//!
//! An experiment is described by a flat `key = value` file:
//!
//! ```text
//! # small warehouse, robustness sweep
//! map = assets/maps/small_warehouse.map
//! agents = 4
//! tasks = 50
//! lambda = 1
//! delays_per_agent = 10
//! algo = tp_replan, k_tp, p_tp
//! k = 0, 1, 2
//! p = 0.05, 1
//! pd = 0.1
//! itermax = 10
//! seeds = 25          # or an explicit list `3, 17, 42`, or a range `0..25`
//! out = results.csv
//! summary = true
//! ```
//!
//! `k` values expand `k_tp`, and every `(p, pd)` pair expands `p_tp`. For
//! every seed the task stream, delay schedule and algorithm randomness come
//! from sub-seeds derived from it, so all algorithms see the same
//! scenarios.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{default_starts, run_simulation, AlgorithmConfig, DelaySchedule, SimError, SimOptions, Variant};
use crate::events::{parse_log, Coord, Event, EventParseError};
use crate::gridmap::{GridMap, MapError};
use crate::metrics::{aggregate, RunConfig, RunRecord, Summary, CSV_HEADER};
use crate::taskgen::{generate_tasks, TaskError, TaskStream};
use crate::{seed, Time};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("spec line {line}: {msg}")]
    Spec { line: usize, msg: String },
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("map {path}: {source}")]
    Map { path: PathBuf, source: MapError },
    #[error("map is not well-formed for {0} agents")]
    NotWellFormed(usize),
    #[error(transparent)]
    Tasks(#[from] TaskError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub map: PathBuf,
    pub agents: usize,
    pub tasks: usize,
    pub lambda: f64,
    pub delays_per_agent: u32,
    pub algos: Vec<String>,
    pub ks: Vec<u32>,
    pub ps: Vec<f64>,
    pub pds: Vec<f64>,
    pub itermax: u32,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub summary: bool,
    pub walk_len: usize,
    pub max_steps: Time,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            map: PathBuf::from("assets/maps/small_warehouse.map"),
            agents: 4,
            tasks: 50,
            lambda: 1.0,
            delays_per_agent: 10,
            algos: vec!["tp_replan".into()],
            ks: vec![0],
            ps: vec![1.0],
            pds: vec![0.1],
            itermax: crate::engine::DEFAULT_ITERMAX,
            seeds: (0..25).collect(),
            out: None,
            summary: true,
            walk_len: crate::engine::DEFAULT_WALK_LEN,
            max_steps: crate::engine::DEFAULT_MAX_STEPS,
        }
    }
}

fn list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| format!("bad list item {s:?}")))
        .collect()
}

fn scalar<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value.trim().parse::<T>().map_err(|_| format!("bad value {value:?}"))
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, String> {
    let v = value.trim();
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (scalar(a)?, scalar(b)?);
        return Ok((a..b).collect());
    }
    if v.contains(',') {
        return list(v);
    }
    let n: u64 = scalar(v)?;
    Ok((0..n).collect())
}

impl ExperimentSpec {
    /// Reads a spec file; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut spec = ExperimentSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ExperimentError::Spec { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            spec.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<FsPath>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut spec = Self::parse(&text)?;
        if spec.map.is_relative() {
            if let Some(dir) = path.parent() {
                spec.map = dir.join(&spec.map);
            }
        }
        Ok(spec)
    }

    /// Sets one key; the same keys are accepted from files and overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key.replace('-', "_").as_str() {
            "map" => self.map = PathBuf::from(value),
            "agents" => self.agents = scalar(value)?,
            "tasks" => self.tasks = scalar(value)?,
            "lambda" => self.lambda = scalar(value)?,
            "delays_per_agent" => self.delays_per_agent = scalar(value)?,
            "algo" | "algos" => self.algos = list(value)?,
            "k" => self.ks = list(value)?,
            "p" => self.ps = list(value)?,
            "pd" => self.pds = list(value)?,
            "itermax" => self.itermax = scalar(value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "summary" => self.summary = scalar(value)?,
            "walk_len" => self.walk_len = scalar(value)?,
            "max_steps" => self.max_steps = scalar(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Expands the algorithm grid, in the order algorithms are listed.
    pub fn algorithms(&self) -> Result<Vec<AlgorithmConfig>, ExperimentError> {
        let mut out = Vec::new();
        for name in &self.algos {
            match name.as_str() {
                "tp" => out.push(AlgorithmConfig::tp()),
                "tp_replan" => out.push(AlgorithmConfig::tp_replan()),
                "k_tp" => out.extend(self.ks.iter().map(|&k| AlgorithmConfig::k_tp(k))),
                "p_tp" => {
                    for &p in &self.ps {
                        for &pd in &self.pds {
                            out.push(AlgorithmConfig::p_tp(p, pd).with_itermax(self.itermax));
                        }
                    }
                }
                other => return Err(ExperimentError::Invalid(format!("unknown algorithm {other:?}"))),
            }
        }
        for c in &out {
            c.validate()?;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.agents == 0 || self.tasks == 0 || self.seeds.is_empty() {
            return Err(ExperimentError::Invalid("agents, tasks and seeds must be positive".into()));
        }
        if self.algorithms()?.is_empty() {
            return Err(ExperimentError::Invalid("no algorithms selected".into()));
        }
        Ok(())
    }
}

/// The columns that describe an algorithm in the CSV.
pub fn run_config(spec: &ExperimentSpec, algo: &AlgorithmConfig) -> RunConfig {
    let (k, p, pd) = match algo.variant {
        Variant::KTp { k } => (Some(k), None, None),
        Variant::PTp { p, p_d, .. } => (None, Some(p), Some(p_d)),
        Variant::Tp | Variant::TpReplan => (None, None, None),
    };
    RunConfig {
        algo: algo.name().into(),
        k,
        p,
        pd,
        agents: spec.agents,
        lambda: spec.lambda,
        delays_per_agent: spec.delays_per_agent,
    }
}

/// Task stream and delay schedule for one seed, shared by all algorithms.
pub fn scenario(map: &GridMap, spec: &ExperimentSpec, run_seed: u64) -> Result<(TaskStream, DelaySchedule), TaskError> {
    let stream = generate_tasks(map, spec.tasks, spec.lambda, seed::derive(run_seed, seed::TASKS))?;
    let delays = DelaySchedule::quota(spec.delays_per_agent, seed::derive(run_seed, seed::DELAYS));
    Ok((stream, delays))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub record: RunRecord,
    pub error: Option<String>,
    pub violations: Vec<TraceViolation>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<Summary>,
    pub summary_rows: bool,
}

impl ExperimentResult {
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|r| r.error.is_none() && r.violations.is_empty())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.runs {
            out.push_str(&r.record.csv_row());
            out.push('\n');
        }
        if self.summary_rows {
            for s in &self.summaries {
                out.push_str(&s.csv_row());
                out.push('\n');
            }
        }
        out
    }
}

/// Runs every `(algorithm, seed)` pair, in parallel, and audits each
/// trace. Results come back in `(algorithm, seed)` order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let map =
        GridMap::from_file(&spec.map).map_err(|source| ExperimentError::Map { path: spec.map.clone(), source })?;
    if !map.check_well_formed(spec.agents).passed() {
        return Err(ExperimentError::NotWellFormed(spec.agents));
    }
    let algos = spec.algorithms()?;
    let starts = default_starts(&map, spec.agents)?;
    let scenarios: Vec<(TaskStream, DelaySchedule)> =
        spec.seeds.iter().map(|&s| scenario(&map, spec, s)).collect::<Result<_, _>>()?;
    let opts = SimOptions { max_steps: spec.max_steps, walk_len: spec.walk_len };
    let jobs: Vec<(usize, usize)> = (0..algos.len()).flat_map(|a| (0..spec.seeds.len()).map(move |s| (a, s))).collect();
    let runs: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(ai, si)| {
            let run_seed = spec.seeds[si];
            let algo = algos[ai].with_seed(seed::derive(run_seed, seed::ALGO));
            let (stream, delays) = &scenarios[si];
            let config = run_config(spec, &algo);
            match run_simulation(&map, stream, &starts, &algo, delays, &opts) {
                Ok(out) => {
                    let violations = verify_trace(&map, &out.events);
                    RunResult {
                        record: RunRecord { config, seed: run_seed, metrics: Some(out.metrics) },
                        error: None,
                        violations,
                        events: out.events,
                    }
                }
                Err(e) => RunResult {
                    record: RunRecord { config, seed: run_seed, metrics: None },
                    error: Some(e.to_string()),
                    violations: Vec::new(),
                    events: Vec::new(),
                },
            }
        })
        .collect();
    let mut summaries = Vec::new();
    for chunk in runs.chunks(spec.seeds.len()) {
        let records: Vec<RunRecord> = chunk.iter().map(|r| r.record.clone()).collect();
        if let Ok(s) = aggregate(&records) {
            summaries.push(s);
        }
    }
    Ok(ExperimentResult { runs, summaries, summary_rows: spec.summary })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    VertexConflict { t: Time, agents: (usize, usize), at: Coord },
    EdgeConflict { t: Time, agents: (usize, usize) },
    Teleport { t: Time, agent: usize, from: Coord, to: Coord },
    Blocked { t: Time, agent: usize, at: Coord },
    Discontinuous { t: Time, agent: usize },
    MissingMove { t: Time, agent: usize },
    Bookkeeping { t: Time, msg: String },
}

fn manhattan(a: Coord, b: Coord) -> u32 {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Replays the `move` records and checks that no two agents share a vertex
/// or swap along an edge, that every step is a wait or a unit move onto a
/// free cell, and that every assigned task is picked up and then delivered
/// by its agent exactly once.
pub fn verify_trace(map: &GridMap, events: &[Event]) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    let mut steps: BTreeMap<Time, BTreeMap<usize, (Coord, Coord)>> = BTreeMap::new();
    for e in events {
        if let Event::Move { t, agent, from, to } = *e {
            if steps.entry(t).or_default().insert(agent, (from, to)).is_some() {
                out.push(TraceViolation::Bookkeeping { t, msg: format!("agent {agent} moved twice") });
            }
        }
    }
    // traces[a][t] is the position at time t
    let mut traces: BTreeMap<usize, Vec<Coord>> = BTreeMap::new();
    if let Some((&t0, first)) = steps.iter().next() {
        if t0 != 1 {
            out.push(TraceViolation::Bookkeeping { t: t0, msg: "moves do not start at t=1".into() });
        }
        for (&a, &(from, _)) in first {
            traces.insert(a, vec![from]);
        }
        let starts: Vec<(usize, Coord)> = first.iter().map(|(&a, &(f, _))| (a, f)).collect();
        for (i, &(a, va)) in starts.iter().enumerate() {
            for &(b, vb) in &starts[i + 1..] {
                if va == vb {
                    out.push(TraceViolation::VertexConflict { t: 0, agents: (a, b), at: va });
                }
            }
        }
    }
    let agents: Vec<usize> = traces.keys().copied().collect();
    for (&t, moves) in &steps {
        for &a in &agents {
            let Some(&(from, to)) = moves.get(&a) else {
                out.push(TraceViolation::MissingMove { t, agent: a });
                let last = *traces[&a].last().expect("nonempty");
                traces.get_mut(&a).expect("known").push(last);
                continue;
            };
            if *traces[&a].last().expect("nonempty") != from {
                out.push(TraceViolation::Discontinuous { t, agent: a });
            }
            if manhattan(from, to) > 1 {
                out.push(TraceViolation::Teleport { t, agent: a, from, to });
            }
            if map.vertex_at(to.0, to.1).is_none() {
                out.push(TraceViolation::Blocked { t, agent: a, at: to });
            }
            traces.get_mut(&a).expect("known").push(to);
        }
        let list: Vec<(usize, Coord, Coord)> = moves.iter().map(|(&a, &(f, to))| (a, f, to)).collect();
        for (i, &(a, fa, ta)) in list.iter().enumerate() {
            for &(b, fb, tb) in &list[i + 1..] {
                if ta == tb {
                    out.push(TraceViolation::VertexConflict { t, agents: (a, b), at: ta });
                } else if fa == tb && fb == ta && fa != ta {
                    out.push(TraceViolation::EdgeConflict { t, agents: (a, b) });
                }
            }
        }
    }
    check_bookkeeping(events, &traces, &mut out);
    out
}

fn check_bookkeeping(events: &[Event], traces: &BTreeMap<usize, Vec<Coord>>, out: &mut Vec<TraceViolation>) {
    struct Open {
        agent: usize,
        since: Time,
        pickup: Coord,
        delivery: Coord,
    }
    let mut open: BTreeMap<usize, Open> = BTreeMap::new();
    let mut finished: BTreeMap<usize, Time> = BTreeMap::new();
    let pos = |a: usize, t: Time| traces.get(&a).and_then(|tr| tr.get(t as usize)).copied();
    for e in events {
        match *e {
            Event::Assign { t, agent, task, pickup, delivery } => {
                if open.contains_key(&task) || finished.contains_key(&task) {
                    out.push(TraceViolation::Bookkeeping { t, msg: format!("task {task} assigned twice") });
                }
                if open.values().any(|o| o.agent == agent) {
                    out.push(TraceViolation::Bookkeeping { t, msg: format!("agent {agent} holds two tasks") });
                }
                open.insert(task, Open { agent, since: t, pickup, delivery });
            }
            Event::Complete { t, agent, task } => {
                let Some(o) = open.remove(&task) else {
                    out.push(TraceViolation::Bookkeeping {
                        t,
                        msg: format!("task {task} completed without assignment"),
                    });
                    continue;
                };
                if o.agent != agent {
                    out.push(TraceViolation::Bookkeeping { t, msg: format!("task {task} completed by agent {agent}") });
                }
                let picked = (o.since..=t).any(|s| pos(agent, s) == Some(o.pickup));
                if !picked {
                    out.push(TraceViolation::Bookkeeping { t, msg: format!("task {task} delivered before pickup") });
                }
                if pos(agent, t) != Some(o.delivery) {
                    out.push(TraceViolation::Bookkeeping {
                        t,
                        msg: format!("task {task} completed away from delivery"),
                    });
                }
                finished.insert(task, t);
            }
            _ => {}
        }
    }
    for (task, o) in open {
        out.push(TraceViolation::Bookkeeping { t: o.since, msg: format!("task {task} never completed") });
    }
}

/// [`verify_trace`] on a textual log.
pub fn verify_log_text(map: &GridMap, text: &str) -> Result<Vec<TraceViolation>, EventParseError> {
    Ok(verify_trace(map, &parse_log(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::parse_map;

    fn mv(t: Time, agent: usize, from: Coord, to: Coord) -> Event {
        Event::Move { t, agent, from, to }
    }

    #[test]
    fn spec_parsing_and_grid() {
        let spec = ExperimentSpec::parse(
            "agents = 8\nalgo = tp_replan, k_tp, p_tp\nk = 0,1\np = 0.05, 1\npd = 0.1\nseeds = 3..6\n",
        )
        .unwrap();
        assert_eq!(spec.agents, 8);
        assert_eq!(spec.seeds, vec![3, 4, 5]);
        let algos = spec.algorithms().unwrap();
        assert_eq!(algos.len(), 5);
        assert_eq!(algos[1], AlgorithmConfig::k_tp(0));
        assert!(ExperimentSpec::parse("colour = blue\n").is_err());
        assert_eq!(ExperimentSpec::parse("seeds = 4").unwrap().seeds, vec![0, 1, 2, 3]);
        assert_eq!(ExperimentSpec::parse("seeds = 9, 2").unwrap().seeds, vec![9, 2]);
    }

    #[test]
    fn clean_log_passes() {
        let m = parse_map("3 2\n...\n...\n").unwrap();
        let log = vec![
            mv(1, 0, (0, 0), (1, 0)),
            mv(1, 1, (2, 1), (2, 1)),
            mv(2, 0, (1, 0), (2, 0)),
            mv(2, 1, (2, 1), (1, 1)),
        ];
        assert!(verify_trace(&m, &log).is_empty());
    }

    #[test]
    fn detects_injected_faults() {
        let m = parse_map("3 2\n...\n...\n").unwrap();
        let shared = vec![mv(1, 0, (0, 0), (1, 0)), mv(1, 1, (1, 1), (1, 0))];
        assert_eq!(
            verify_trace(&m, &shared),
            vec![TraceViolation::VertexConflict { t: 1, agents: (0, 1), at: (1, 0) }]
        );
        let jump = vec![mv(1, 0, (0, 0), (2, 0))];
        assert!(matches!(verify_trace(&m, &jump)[..], [TraceViolation::Teleport { .. }]));
        let swap = vec![mv(1, 0, (0, 0), (1, 0)), mv(1, 1, (1, 0), (0, 0))];
        assert!(matches!(verify_trace(&m, &swap)[..], [TraceViolation::EdgeConflict { .. }]));
    }

    #[test]
    fn bookkeeping_errors() {
        let m = parse_map("3 1\n...\n").unwrap();
        let log = vec![
            Event::Assign { t: 0, agent: 0, task: 0, pickup: (1, 0), delivery: (2, 0) },
            mv(1, 0, (0, 0), (1, 0)),
            Event::Complete { t: 1, agent: 0, task: 0 },
        ];
        let v = verify_trace(&m, &log);
        assert_eq!(v.len(), 1, "{v:?}");
    }
}
