//! A follower one cell behind a leader that gets delayed twice: the
//! lookahead detects the collision and the follower replans with a wait.

use std::collections::BTreeSet;

use anyhow::Result;
use tokenpass::engine::{check_collisions, replan_agent, AlgorithmConfig};
use tokenpass::gridmap::parse_map;
use tokenpass::planner::Path;
use tokenpass::taskgen::{Task, TaskId, TaskStream};
use tokenpass::token::Token;
use tokenpass::AgentId;

fn main() -> Result<()> {
    let map = parse_map("12 1\ne..........e\n")?;
    let v = |x| map.vertex(x, 0).expect("corridor cell");
    let (a1, a2) = (AgentId(0), AgentId(1));
    let mut token = Token::new(&map, &[v(0), v(1)])?;
    token.release_tasks(&TaskStream::from_tasks(vec![Task::new(TaskId(0), v(9), v(10), 0)]), 0);
    token.assign(a1, TaskId(0))?;
    token.install_path(a1, Path::new(0, (0..=10).map(v).collect()).with_goal_marks(vec![9, 10]), 0)?;
    token.install_path(a2, Path::new(0, (1..=11).map(v).collect()), 0)?;

    let config = AlgorithmConfig::tp_replan();
    for t in 0..14 {
        let delayed: BTreeSet<AgentId> = if t == 6 || t == 7 { [a2].into() } else { BTreeSet::new() };
        for &a in &delayed {
            token.mark_delayed(a);
        }
        let check = check_collisions(&token, &delayed);
        for e in &check.events {
            println!("t={t}: {:?} collision between {:?} at {:?}", e.kind, e.agents, map.coord(e.at));
        }
        for &a in &check.colliders {
            replan_agent(&mut token, a, &map, &config);
            let next: Vec<_> = token.remaining_path(a).iter().take(4).map(|&u| map.coord(u).0).collect();
            println!("t={t}: agent {} replans, next cells {next:?}", a.0);
        }
        token.advance_traces(&delayed);
    }
    for a in [a1, a2] {
        let trace: Vec<_> = token.agent(a).trace().iter().map(|&u| map.coord(u).0).collect();
        println!("agent {} trace {trace:?}", a.0);
    }
    Ok(())
}
