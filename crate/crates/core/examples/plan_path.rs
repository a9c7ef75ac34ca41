//! Plans a two-leg path around another agent's reserved path.

use anyhow::{Context, Result};
use tokenpass::gridmap::parse_map;
use tokenpass::planner::{default_horizon, k_extension, plan_path, ConstraintTable, Path, PlanRequest};
use tokenpass::AgentId;

fn main() -> Result<()> {
    let map = parse_map("7 3\ne.....e\n.@@.@@.\ne.....e\n")?;
    let v = |x, y| map.vertex(x, y);

    // another agent sweeps the top row from right to left
    let other = Path::new(0, (0..7).rev().map(|x| v(x, 0)).collect::<Result<_, _>>()?);
    let table = ConstraintTable::from_sets([(AgentId(1), &k_extension(&other, 1))]);

    let req = PlanRequest::new(AgentId(0), v(0, 2)?, 0, vec![v(3, 0)?, v(6, 2)?]).with_k(1);
    let path = plan_path(&map, &req, &table, default_horizon(&map, 0, 2, &table)).context("no path")?;
    for (i, &u) in path.vertices().iter().enumerate() {
        let mark = if path.goal_marks().contains(&i) { "  <- goal" } else { "" };
        println!("t={:>2} {:?}{mark}", path.start_time() + i as u32, map.coord(u));
    }
    println!("conflicts with the table: {}", table.violations(&path, Some(AgentId(0))).len());
    Ok(())
}
