//! Run metrics, aggregation and CSV rows.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::events::Event;
use crate::taskgen::TaskStream;
use crate::Time;

pub const CSV_HEADER: &str = "algo,k,p,pd,agents,lambda,delays_per_agent,seed,makespan,service_time,replans,runtime_s";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("run incomplete: {completed} of {total} tasks completed")]
    Incomplete { completed: usize, total: usize },
    #[error("task {0} completed twice")]
    DuplicateCompletion(usize),
    #[error("task {0} is not part of the stream")]
    UnknownTask(usize),
    #[error("cannot aggregate an empty set of runs")]
    Empty,
    #[error("cannot aggregate runs of different configurations")]
    MixedConfigs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// Step at which the last task was completed.
    pub makespan: Time,
    /// Mean of `completion - arrival` over tasks.
    pub service_time: f64,
    pub replans: usize,
    pub runtime_s: f64,
}

/// Derives the metrics from a complete event log.
pub fn compute_metrics(events: &[Event], stream: &TaskStream) -> Result<RunMetrics, MetricsError> {
    let mut done: BTreeMap<usize, Time> = BTreeMap::new();
    let mut replans = 0;
    for e in events {
        match *e {
            Event::Complete { t, task, .. } => {
                if stream.get(crate::TaskId(task)).is_none() {
                    return Err(MetricsError::UnknownTask(task));
                }
                if done.insert(task, t).is_some() {
                    return Err(MetricsError::DuplicateCompletion(task));
                }
            }
            Event::Replan { .. } => replans += 1,
            _ => {}
        }
    }
    if done.len() != stream.len() {
        return Err(MetricsError::Incomplete { completed: done.len(), total: stream.len() });
    }
    let makespan = done.values().copied().max().unwrap_or(0);
    let total: f64 = stream.tasks().iter().map(|task| f64::from(done[&task.id.0] - task.arrival)).sum();
    let service_time = if stream.is_empty() { 0.0 } else { total / stream.len() as f64 };
    Ok(RunMetrics { makespan, service_time, replans, runtime_s: 0.0 })
}

/// The configuration columns of a CSV row. Parameters that do not apply
/// to the algorithm are `None` and written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algo: String,
    pub k: Option<u32>,
    pub p: Option<f64>,
    pub pd: Option<f64>,
    pub agents: usize,
    pub lambda: f64,
    pub delays_per_agent: u32,
}

impl RunConfig {
    fn csv_prefix(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{}",
            self.algo,
            opt(self.k),
            opt(self.p),
            opt(self.pd),
            self.agents,
            self.lambda,
            self.delays_per_agent
        )
    }
}

/// One run: configuration, seed and metrics (`None` for a failed run).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
}

impl RunRecord {
    /// Failed runs have `NA` in the metric columns.
    pub fn csv_row(&self) -> String {
        match &self.metrics {
            Some(m) => format!(
                "{},{},{},{:.4},{},{:.6}",
                self.config.csv_prefix(),
                self.seed,
                m.makespan,
                m.service_time,
                m.replans,
                m.runtime_s
            ),
            None => format!("{},{},NA,NA,NA,NA", self.config.csv_prefix(), self.seed),
        }
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd =
            if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Stat { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub config: RunConfig,
    pub runs: usize,
    pub failed: usize,
    pub makespan: Stat,
    pub service_time: Stat,
    pub replans: Stat,
    pub runtime_s: Stat,
}

impl Summary {
    /// A CSV row with `seed=mean`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},mean,{:.4},{:.4},{:.4},{:.6}",
            self.config.csv_prefix(),
            self.makespan.mean,
            self.service_time.mean,
            self.replans.mean,
            self.runtime_s.mean
        )
    }
}

/// Means and standard deviations over the successful runs of one
/// configuration.
pub fn aggregate(runs: &[RunRecord]) -> Result<Summary, MetricsError> {
    let first = runs.first().ok_or(MetricsError::Empty)?;
    if runs.iter().any(|r| r.config != first.config) {
        return Err(MetricsError::MixedConfigs);
    }
    let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
    if ok.is_empty() {
        return Err(MetricsError::Empty);
    }
    let col = |f: fn(&RunMetrics) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    Ok(Summary {
        config: first.config.clone(),
        runs: ok.len(),
        failed: runs.len() - ok.len(),
        makespan: col(|m| f64::from(m.makespan)),
        service_time: col(|m| m.service_time),
        replans: col(|m| m.replans as f64),
        runtime_s: col(|m| m.runtime_s),
    })
}
