use std::collections::{BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;

use tokenpass::events::{parse_log, write_log, CollisionKind, Event};
use tokenpass::gridmap::{parse_map, GridMap, VertexId};
use tokenpass::metrics::{aggregate, RunConfig, RunMetrics, RunRecord};
use tokenpass::planner::{k_extension, plan_path, ConstraintTable, Path, PlanRequest};
use tokenpass::robustness::{occupancy, vertex_collision_prob};
use tokenpass::taskgen::generate_tasks;
use tokenpass::token::Token;
use tokenpass::{AgentId, Time};

/// A random grid whose first row is all endpoints.
fn grid() -> impl Strategy<Value = GridMap> {
    (3u32..8, 2u32..7).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::sample::select(vec!['.', '.', '.', '@', 'e', 'P', 'D']), (w * (h - 1)) as usize)
            .prop_map(move |cells| {
                let mut text = format!("{w} {h}\n");
                text.push_str(&"e".repeat(w as usize));
                text.push('\n');
                for row in cells.chunks(w as usize) {
                    text.extend(row);
                    text.push('\n');
                }
                parse_map(&text).unwrap()
            })
    })
}

fn pick(map: &GridMap, i: usize) -> VertexId {
    let vs: Vec<VertexId> = map.vertices().collect();
    vs[i % vs.len()]
}

/// Random walk with waits, deterministic in `choices`.
fn walk(map: &GridMap, start: VertexId, choices: &[usize]) -> Vec<VertexId> {
    let mut v = vec![start];
    for &c in choices {
        let cur = *v.last().unwrap();
        let nb = map.neighbors(cur).unwrap();
        v.push(if c % (nb.len() + 1) == nb.len() { cur } else { nb[c % (nb.len() + 1)] });
    }
    v
}

fn bfs_dist(map: &GridMap, a: VertexId, b: VertexId) -> Option<u32> {
    let mut seen = HashSet::from([a]);
    let mut q = VecDeque::from([(a, 0)]);
    while let Some((v, d)) = q.pop_front() {
        if v == b {
            return Some(d);
        }
        for &u in map.neighbors(v).unwrap() {
            if seen.insert(u) {
                q.push_back((u, d + 1));
            }
        }
    }
    None
}

/// Earliest arrival at `goal` after which the agent may rest, by
/// breadth-first search over `(vertex, time)`.
fn space_time_oracle(
    map: &GridMap,
    table: &ConstraintTable,
    start: VertexId,
    goal: VertexId,
    horizon: Time,
) -> Option<Time> {
    let me = Some(AgentId(0));
    let mut seen = HashSet::from([(start, 0)]);
    let mut q = VecDeque::from([(start, 0)]);
    while let Some((v, t)) = q.pop_front() {
        if v == goal && table.can_rest(v, t, me) {
            return Some(t);
        }
        if t == horizon {
            continue;
        }
        for u in std::iter::once(v).chain(map.neighbors(v).unwrap().iter().copied()) {
            let ok = !table.vertex_forbidden(u, t + 1, me) && (u == v || !table.edge_forbidden(v, u, t + 1, me));
            if ok && seen.insert((u, t + 1)) {
                q.push_back((u, t + 1));
            }
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_extension_grows_with_k(map in grid(), s in 0usize..100, moves in prop::collection::vec(0usize..5, 0..10), t0 in 0u32..5, k in 0u32..4) {
        let path = Path::new(t0, walk(&map, pick(&map, s), &moves));
        let small = k_extension(&path, k);
        let big = k_extension(&path, k + 1);
        prop_assert!(small.is_subset_of(&big));
        for (i, &v) in path.vertices().iter().enumerate() {
            prop_assert!(small.forbidden_at(t0 + i as u32).contains(&v));
        }
        prop_assert!(small.forbidden_at(path.end_time() + k + 1).is_empty() || path.vertices().len() == 1);
    }

    #[test]
    fn unconstrained_plan_is_shortest(map in grid(), s in 0usize..100, g in 0usize..100) {
        let (a, b) = (pick(&map, s), pick(&map, g));
        let table = ConstraintTable::new();
        let got = plan_path(&map, &PlanRequest::new(AgentId(0), a, 0, vec![b]), &table, 200);
        match bfs_dist(&map, a, b) {
            Some(d) => {
                let p = got.unwrap();
                prop_assert!(p.is_valid_on(&map));
                prop_assert_eq!(p.first(), a);
                prop_assert_eq!(p.last(), b);
                prop_assert_eq!(p.moves() as u32, d);
            }
            None => prop_assert!(got.is_none()),
        }
    }

    #[test]
    fn constrained_plan_matches_space_time_search(
        map in grid(), s in 0usize..100, g in 0usize..100, o in 0usize..100,
        other_moves in prop::collection::vec(0usize..5, 1..10), k in 0u32..3,
    ) {
        let (a, b, c) = (pick(&map, s), pick(&map, g), pick(&map, o));
        prop_assume!(a != c);
        let other = Path::new(0, walk(&map, c, &other_moves));
        let set = k_extension(&other, k);
        let table = ConstraintTable::from_sets([(AgentId(1), &set)]);
        let horizon = 60;
        let got = plan_path(&map, &PlanRequest::new(AgentId(0), a, 0, vec![b]), &table, horizon);
        let oracle = space_time_oracle(&map, &table, a, b, horizon);
        match (got, oracle) {
            (Some(p), Some(t)) => {
                prop_assert!(p.is_valid_on(&map));
                prop_assert!(table.violations(&p, Some(AgentId(0))).is_empty());
                prop_assert_eq!(p.end_time(), t);
            }
            (None, None) => {}
            (p, t) => prop_assert!(false, "planner {:?} vs oracle {:?}", p.map(|p| p.end_time()), t),
        }
    }

    #[test]
    fn occupancy_is_a_distribution(p_d in 0.0f64..1.0, n in 0usize..20, j in 0usize..50) {
        let o = occupancy(p_d, n, j);
        prop_assert_eq!(o.len(), n + 1);
        prop_assert!(o.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
        prop_assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vertex_probability_symmetric_and_monotone(s in 0.0f64..1.0, mut qs in prop::collection::vec(0.0f64..1.0, 0..6), bump in 0.0f64..1.0) {
        let base = vertex_collision_prob(s, &qs);
        prop_assert!((0.0..=s + 1e-12).contains(&base));
        let mut rev = qs.clone();
        rev.reverse();
        prop_assert!((vertex_collision_prob(s, &rev) - base).abs() < 1e-12);
        prop_assert!(vertex_collision_prob((s + bump).min(1.0), &qs) >= base - 1e-12);
        if let Some(q) = qs.first_mut() {
            *q = (*q + bump).min(1.0);
            prop_assert!(vertex_collision_prob(s, &qs) >= base - 1e-12);
        }
    }

    #[test]
    fn generated_tasks_are_well_formed(count in 1usize..80, lambda in 0.05f64..5.0, seed in any::<u64>()) {
        let map = parse_map("6 3\nP.DD.P\n......\nE....e\n").unwrap();
        let s = generate_tasks(&map, count, lambda, seed).unwrap();
        prop_assert_eq!(s.len(), count);
        prop_assert!(s.tasks().windows(2).all(|w| w[0].arrival <= w[1].arrival));
        for t in s.tasks() {
            prop_assert!(t.pickup != t.delivery);
            prop_assert!(map.pickup_candidates().contains(&t.pickup));
            prop_assert!(map.delivery_candidates().contains(&t.delivery));
        }
        prop_assert_eq!(s, generate_tasks(&map, count, lambda, seed).unwrap());
    }

    #[test]
    fn trace_follows_path_or_repeats(map in grid(), s in 0usize..100, moves in prop::collection::vec(0usize..5, 1..10), delays in prop::collection::vec(any::<bool>(), 1..25)) {
        let start = pick(&map, s);
        let verts = walk(&map, start, &moves);
        let mut tok = Token::new(&map, &[start]).unwrap();
        tok.install_path(AgentId(0), Path::new(0, verts.clone()), 0).unwrap();
        let mut idx = 0usize;
        for &d in &delays {
            let set = if d { BTreeSet::from([AgentId(0)]) } else { BTreeSet::new() };
            tok.advance_traces(&set);
            if !d && idx + 1 < verts.len() {
                idx += 1;
            }
        }
        let trace = tok.agent(AgentId(0)).trace();
        prop_assert_eq!(trace.len(), delays.len() + 1);
        prop_assert_eq!(*trace.last().unwrap(), verts[idx]);
        for (t, &d) in delays.iter().enumerate() {
            if d {
                prop_assert_eq!(trace[t + 1], trace[t]);
            }
        }
    }

    #[test]
    fn map_text_round_trips(map in grid()) {
        let again = parse_map(&map.to_text()).unwrap();
        prop_assert_eq!(again.to_text(), map.to_text());
        prop_assert_eq!(again.num_vertices(), map.num_vertices());
    }

    #[test]
    fn event_log_round_trips(raw in prop::collection::vec((0u8..7, 0u32..500, 0usize..8, 0u32..30, 0u32..30, any::<bool>()), 0..40)) {
        let events: Vec<Event> = raw
            .into_iter()
            .map(|(kind, t, agent, x, y, flag)| match kind {
                0 => Event::Move { t, agent, from: (x, y), to: (y, x) },
                1 => Event::Delay { t, agent, at: (x, y), forced: flag },
                2 => Event::Assign { t, agent, task: x as usize, pickup: (x, y), delivery: (y, x) },
                3 => Event::Replan { t, agent, ok: flag },
                4 => Event::Collision { t, agent, other: y as usize, kind: if flag { CollisionKind::Swap } else { CollisionKind::Vertex }, at: (x, y) },
                5 => Event::Deadlock { t, agent, walk: x as usize },
                _ => Event::Complete { t, agent, task: y as usize },
            })
            .collect();
        prop_assert_eq!(parse_log(&write_log(&events)).unwrap(), events);
    }

    #[test]
    fn aggregate_ignores_run_order(makespans in prop::collection::vec(1u32..1000, 1..20), rot in 0usize..20) {
        let config = RunConfig { algo: "tp".into(), k: None, p: None, pd: None, agents: 2, lambda: 1.0, delays_per_agent: 0 };
        let mut runs: Vec<RunRecord> = makespans
            .iter()
            .enumerate()
            .map(|(i, &m)| RunRecord {
                config: config.clone(),
                seed: i as u64,
                metrics: Some(RunMetrics { makespan: m, service_time: f64::from(m) / 3.0, replans: i, runtime_s: 0.0 }),
            })
            .collect();
        let a = aggregate(&runs).unwrap();
        let len = runs.len();
        runs.rotate_left(rot % len);
        let b = aggregate(&runs).unwrap();
        prop_assert!((a.makespan.mean - b.makespan.mean).abs() < 1e-9);
        prop_assert!((a.makespan.sd - b.makespan.sd).abs() < 1e-9);
        prop_assert!((a.replans.mean - b.replans.mean).abs() < 1e-9);
    }
}
