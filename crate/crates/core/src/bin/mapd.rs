use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use tokenpass::events::write_log;
use tokenpass::experiment::{run_experiment, ExperimentSpec};

/// Runs a batch of MAPD simulations and writes one CSV row per run.
#[derive(Debug, Parser)]
#[command(name = "mapd", version)]
struct Cli {
    /// Experiment spec file (`key = value` lines); flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated algorithms: tp, tp_replan, k_tp, p_tp.
    #[arg(long)]
    algo: Option<String>,
    /// Comma-separated robustness radii for k_tp.
    #[arg(long)]
    k: Option<String>,
    /// Comma-separated probability thresholds for p_tp.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated assumed delay probabilities for p_tp.
    #[arg(long)]
    pd: Option<String>,
    #[arg(long)]
    itermax: Option<u32>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    delays_per_agent: Option<u32>,
    /// Seed count `N`, range `a..b` or list `s1,s2,...`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    map: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append per-configuration mean rows.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    summary: Option<bool>,
    /// Directory for per-run event logs.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |key, v: Option<String>| {
            if let Some(v) = v {
                out.push((key, v));
            }
        };
        push("algo", self.algo.clone());
        push("k", self.k.clone());
        push("p", self.p.clone());
        push("pd", self.pd.clone());
        push("itermax", self.itermax.map(|v| v.to_string()));
        push("agents", self.agents.map(|v| v.to_string()));
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("tasks", self.tasks.map(|v| v.to_string()));
        push("delays_per_agent", self.delays_per_agent.map(|v| v.to_string()));
        push("seeds", self.seeds.clone());
        push("map", self.map.as_ref().map(|p| p.display().to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("summary", self.summary.map(|v| v.to_string()));
        out
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let mut spec = match &cli.spec {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::default(),
    };
    for (key, value) in cli.overrides() {
        spec.set(key, &value).map_err(anyhow::Error::msg).with_context(|| format!("--{key}"))?;
    }
    let result = run_experiment(&spec)?;
    let csv = result.to_csv();
    match &spec.out {
        Some(path) => std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    if let Some(dir) = &cli.log_dir {
        std::fs::create_dir_all(dir)?;
        for r in &result.runs {
            let name = format!(
                "{}_k{}_p{}_pd{}_seed{}.log",
                r.record.config.algo,
                r.record.config.k.map_or(String::new(), |k| k.to_string()),
                r.record.config.p.map_or(String::new(), |p| p.to_string()),
                r.record.config.pd.map_or(String::new(), |p| p.to_string()),
                r.record.seed
            );
            std::fs::write(dir.join(name), write_log(&r.events))?;
        }
    }
    for r in &result.runs {
        if let Some(e) = &r.error {
            eprintln!("{} seed {}: {e}", r.record.config.algo, r.record.seed);
        }
        if !r.violations.is_empty() {
            eprintln!(
                "{} seed {}: {} trace violations, first {:?}",
                r.record.config.algo,
                r.record.seed,
                r.violations.len(),
                r.violations[0]
            );
        }
    }
    Ok(result.all_ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
