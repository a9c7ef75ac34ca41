//! Loads a warehouse map, prints its roles and checks well-formedness.
//!
//! `cargo run --example parse_map -- [path] [agents]`

use anyhow::Result;
use tokenpass::gridmap::GridMap;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let path =
        args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets/maps/small_warehouse.map").into());
    let agents: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let map = GridMap::from_file(&path)?;
    println!("{}x{} grid, {} free cells", map.width(), map.height(), map.num_vertices());
    println!(
        "{} endpoints ({} parking), {} pickup and {} delivery candidates",
        map.endpoints().len(),
        map.parking_endpoints().len(),
        map.pickup_candidates().len(),
        map.delivery_candidates().len()
    );
    let report = map.check_well_formed(agents);
    println!("well-formed for {agents} agents: {}", report.passed());
    if !report.disconnected_pairs.is_empty() {
        println!("first disconnected endpoint pair: {:?}", report.disconnected_pairs[0]);
    }
    print!("{}", map.to_text());
    Ok(())
}
