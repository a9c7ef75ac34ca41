//! Replans and makespan across k and p on the small warehouse, averaged
//! over seeds. With `heavy` as the first argument every agent gets 50
//! delays instead of 10.
//!
//! `cargo run --release --example robustness_table -- [heavy] [seeds]`

use anyhow::Result;
use tokenpass::experiment::{run_experiment, ExperimentSpec};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let heavy = args.iter().any(|a| a == "heavy");
    let seeds: u64 = args.iter().find_map(|a| a.parse().ok()).unwrap_or(25);
    let spec = ExperimentSpec {
        map: concat!(env!("CARGO_MANIFEST_DIR"), "/assets/maps/small_warehouse.map").into(),
        delays_per_agent: if heavy { 50 } else { 10 },
        algos: vec!["tp_replan".into(), "k_tp".into(), "p_tp".into()],
        ks: vec![1, 2, 3, 4],
        ps: vec![0.5, 0.25, 0.1, 0.05],
        seeds: (0..seeds).collect(),
        ..ExperimentSpec::default()
    };
    let result = run_experiment(&spec)?;
    println!("{:<10} {:>5} {:>5} {:>10} {:>9} {:>8}", "algo", "k", "p", "makespan", "replans", "time_s");
    for s in &result.summaries {
        let c = &s.config;
        println!(
            "{:<10} {:>5} {:>5} {:>10.2} {:>9.2} {:>8.4}",
            c.algo,
            c.k.map_or("-".into(), |k| k.to_string()),
            c.p.map_or("-".into(), |p| p.to_string()),
            s.makespan.mean,
            s.replans.mean,
            s.runtime_s.mean
        );
    }
    if !result.all_ok() {
        anyhow::bail!("some runs failed or produced an invalid trace");
    }
    Ok(())
}
