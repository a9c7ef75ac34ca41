//! Prints the time-indexed vertex sets a path blocks for a range of k.

use anyhow::Result;
use tokenpass::gridmap::parse_map;
use tokenpass::planner::{k_extension, Path};

fn main() -> Result<()> {
    let map = parse_map("4 1\n....\n")?;
    let path = Path::new(1, (0..3).map(|x| map.vertex(x, 0)).collect::<Result<_, _>>()?);
    for k in 0..=2 {
        let ext = k_extension(&path, k);
        println!("k = {k}");
        for t in 0..=path.end_time() + k + 1 {
            let set: Vec<String> = ext.forbidden_at(t).iter().map(|&u| format!("v{}", map.coord(u).0 + 1)).collect();
            if !set.is_empty() {
                println!("  t={t}: {{{}}}", set.join(", "));
            }
        }
    }
    Ok(())
}
