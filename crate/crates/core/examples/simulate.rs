//! One simulated run of every algorithm on the same scenario, with the
//! head of the event log of the last one.
//!
//! `cargo run --release --example simulate -- [seed]`

use anyhow::Result;
use tokenpass::engine::{default_starts, run_simulation, AlgorithmConfig, DelaySchedule, SimOptions};
use tokenpass::experiment::verify_trace;
use tokenpass::gridmap::GridMap;
use tokenpass::taskgen::generate_tasks;

fn main() -> Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let map = GridMap::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/maps/small_warehouse.map"))?;
    let starts = default_starts(&map, 4)?;
    let stream = generate_tasks(&map, 50, 1.0, seed)?;
    let delays = DelaySchedule::quota(10, seed);
    let algos = [
        AlgorithmConfig::tp(),
        AlgorithmConfig::tp_replan(),
        AlgorithmConfig::k_tp(2),
        AlgorithmConfig::p_tp(0.1, 0.1),
    ];
    let mut last = None;
    for algo in algos {
        let out = run_simulation(&map, &stream, &starts, &algo.with_seed(seed), &delays, &SimOptions::default())?;
        println!(
            "{:<9} makespan {:>4}  service {:>7.2}  replans {:>3}  collisions {:>3}  clean trace {}",
            algo.name(),
            out.metrics.makespan,
            out.metrics.service_time,
            out.metrics.replans,
            out.collisions,
            verify_trace(&map, &out.events).is_empty()
        );
        last = Some(out);
    }
    if let Some(out) = last {
        for e in out.events.iter().take(12) {
            println!("{e}");
        }
    }
    Ok(())
}
