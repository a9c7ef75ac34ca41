//! Single-agent space-time planning.
//!
//! Paths are planned one at a time against a [`ConstraintTable`] built from
//! the k-extensions of the other agents' paths. The search is A* over
//! `(vertex, time, goal-stage)` states with wait actions. Once the search
//! time passes the last time-indexed constraint the problem is static, so
//! all later times share one search key; this keeps infeasible searches
//! finite without changing any optimal answer.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::gridmap::{GridMap, VertexId};
use crate::seed::splitmix64;
use crate::{AgentId, Time};

/// A timed sequence of vertices; consecutive entries are equal (wait) or
/// adjacent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    start_time: Time,
    vertices: Vec<VertexId>,
    /// Index at which each planned goal was reached, in goal order.
    goal_marks: Vec<usize>,
}

impl Path {
    pub fn new(start_time: Time, vertices: Vec<VertexId>) -> Self {
        assert!(!vertices.is_empty(), "empty path");
        Path { start_time, vertices, goal_marks: Vec::new() }
    }

    /// The resting path `<v>`.
    pub fn trivial(v: VertexId, t: Time) -> Self {
        Path::new(t, vec![v])
    }

    pub fn with_goal_marks(mut self, marks: Vec<usize>) -> Self {
        assert!(marks.iter().all(|&m| m < self.vertices.len()));
        self.goal_marks = marks;
        self
    }

    pub fn start_time(&self) -> Time {
        self.start_time
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn goal_marks(&self) -> &[usize] {
        &self.goal_marks
    }

    /// Number of actions `n`; the path has `n + 1` vertices.
    pub fn moves(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn end_time(&self) -> Time {
        self.start_time + self.moves() as Time
    }

    pub fn first(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn last(&self) -> VertexId {
        *self.vertices.last().expect("nonempty")
    }

    pub fn is_trivial(&self) -> bool {
        self.vertices.len() == 1
    }

    /// Planned vertex at absolute time `t`, clamped to the ends.
    pub fn at_time(&self, t: Time) -> VertexId {
        let h = t.saturating_sub(self.start_time) as usize;
        self.vertices[h.min(self.moves())]
    }

    /// The same vertices anchored at a different start time.
    pub fn retimed(&self, start_time: Time) -> Path {
        Path { start_time, ..self.clone() }
    }

    /// Checks that every step is a wait or a move along a map edge.
    pub fn is_valid_on(&self, map: &GridMap) -> bool {
        self.vertices.iter().all(|&v| map.is_valid(v))
            && self.vertices.windows(2).all(|w| w[0] == w[1] || map.are_adjacent(w[0], w[1]))
    }
}

/// Constraints induced by one path: forbidden `(vertex, time)` pairs,
/// forbidden edge traversals `(from, to, arrival time)`, and the resting
/// vertex that is blocked from the path's end onwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    pub vertex: Vec<(VertexId, Time)>,
    pub edge: Vec<(VertexId, VertexId, Time)>,
    pub rest: (VertexId, Time),
}

impl ConstraintSet {
    /// Vertices forbidden at time `t` by the time-indexed part.
    pub fn forbidden_at(&self, t: Time) -> BTreeSet<VertexId> {
        self.vertex.iter().filter(|&&(_, ct)| ct == t).map(|&(v, _)| v).collect()
    }

    pub fn is_subset_of(&self, other: &ConstraintSet) -> bool {
        let ov: BTreeSet<_> = other.vertex.iter().collect();
        let oe: BTreeSet<_> = other.edge.iter().collect();
        self.rest == other.rest
            && self.vertex.iter().all(|c| ov.contains(c))
            && self.edge.iter().all(|c| oe.contains(c))
    }
}

/// The k-extension of a path: at every time `t` from the path's start to
/// `k` steps past its end, every vertex `pi[t-k..=t+k]` (indices clamped to
/// the path) is forbidden to other agents. Reverse traversals of each of
/// the path's moves are forbidden within the same window, and the final
/// vertex is a permanent obstacle from the path's end.
pub fn k_extension(path: &Path, k: u32) -> ConstraintSet {
    let s = path.start_time();
    let n = path.moves() as i64;
    let k = i64::from(k);
    let verts = path.vertices();
    let mut vertex = BTreeSet::new();
    for rel in 0..=(n + k) {
        let lo = (rel - k).max(0);
        let hi = (rel + k).min(n);
        for h in lo..=hi {
            vertex.insert((verts[h as usize], s + rel as Time));
        }
    }
    let mut edge = BTreeSet::new();
    for h in 0..n {
        let (a, b) = (verts[h as usize], verts[h as usize + 1]);
        if a == b {
            continue;
        }
        let arrive = h + 1;
        for rel in (arrive - k).max(1)..=(arrive + k) {
            edge.insert((b, a, s + rel as Time));
        }
    }
    ConstraintSet {
        vertex: vertex.into_iter().collect(),
        edge: edge.into_iter().collect(),
        rest: (path.last(), path.end_time()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct OwnerMask(u64);

impl OwnerMask {
    fn bit(agent: AgentId) -> u64 {
        assert!(agent.0 < 64, "constraint table supports at most 64 agents");
        1u64 << agent.0
    }

    fn add(&mut self, agent: AgentId) {
        self.0 |= Self::bit(agent);
    }

    fn blocks(self, ignore: Option<AgentId>) -> bool {
        match ignore {
            Some(a) if a.0 < 64 => self.0 & !(1u64 << a.0) != 0,
            _ => self.0 != 0,
        }
    }
}

fn vt_key(v: VertexId, t: Time) -> u64 {
    (u64::from(v.0) << 32) | u64::from(t)
}

/// Union of several agents' constraint sets, queryable with one owner
/// excluded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintTable {
    vertex: HashMap<u64, OwnerMask>,
    edge: HashMap<(VertexId, VertexId, Time), OwnerMask>,
    permanent: HashMap<VertexId, Vec<(Time, AgentId)>>,
    latest: HashMap<VertexId, Vec<(Time, AgentId)>>,
    max_time: Time,
}

impl ConstraintTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sets<'a>(sets: impl IntoIterator<Item = (AgentId, &'a ConstraintSet)>) -> Self {
        let mut table = Self::new();
        for (owner, set) in sets {
            table.insert(owner, set);
        }
        table
    }

    pub fn insert(&mut self, owner: AgentId, set: &ConstraintSet) {
        for &(v, t) in &set.vertex {
            self.vertex.entry(vt_key(v, t)).or_default().add(owner);
            let latest = self.latest.entry(v).or_default();
            match latest.iter_mut().find(|(_, a)| *a == owner) {
                Some(entry) => entry.0 = entry.0.max(t),
                None => latest.push((t, owner)),
            }
            self.max_time = self.max_time.max(t);
        }
        for &(a, b, t) in &set.edge {
            self.edge.entry((a, b, t)).or_default().add(owner);
            self.max_time = self.max_time.max(t);
        }
        let (v, t) = set.rest;
        self.permanent.entry(v).or_default().push((t, owner));
        self.max_time = self.max_time.max(t);
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edge.is_empty() && self.permanent.is_empty()
    }

    /// Latest time mentioned by any constraint.
    pub fn max_time(&self) -> Time {
        self.max_time
    }

    /// Whether an agent other than `ignore` forbids `v` at `t`, either by a
    /// time-indexed constraint or by resting there.
    pub fn vertex_forbidden(&self, v: VertexId, t: Time, ignore: Option<AgentId>) -> bool {
        if self.vertex.get(&vt_key(v, t)).is_some_and(|m| m.blocks(ignore)) {
            return true;
        }
        self.permanent.get(&v).is_some_and(|list| list.iter().any(|&(start, a)| Some(a) != ignore && t >= start))
    }

    /// Whether traversing `from -> to`, arriving at `t`, is forbidden.
    pub fn edge_forbidden(&self, from: VertexId, to: VertexId, t: Time, ignore: Option<AgentId>) -> bool {
        self.edge.get(&(from, to, t)).is_some_and(|m| m.blocks(ignore))
    }

    /// Whether an agent arriving at `v` at `t` may stay there forever.
    pub fn can_rest(&self, v: VertexId, t: Time, ignore: Option<AgentId>) -> bool {
        let later = self.latest.get(&v).is_some_and(|list| list.iter().any(|&(lt, a)| Some(a) != ignore && lt > t));
        !later && self.resting_owner(v, ignore).is_none()
    }

    /// Agent (other than `ignore`) whose path ends at `v`, if any.
    pub fn resting_owner(&self, v: VertexId, ignore: Option<AgentId>) -> Option<AgentId> {
        self.permanent.get(&v)?.iter().find(|&&(_, a)| Some(a) != ignore).map(|&(_, a)| a)
    }

    /// Checks a path against the table and returns the violated steps.
    pub fn violations(&self, path: &Path, ignore: Option<AgentId>) -> Vec<(usize, Violation)> {
        let mut out = Vec::new();
        let s = path.start_time();
        for (h, w) in path.vertices().windows(2).enumerate() {
            let t = s + h as Time + 1;
            if self.vertex_forbidden(w[1], t, ignore) {
                out.push((h + 1, Violation::Vertex(w[1], t)));
            }
            if w[0] != w[1] && self.edge_forbidden(w[0], w[1], t, ignore) {
                out.push((h + 1, Violation::Edge(w[0], w[1], t)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Vertex(VertexId, Time),
    Edge(VertexId, VertexId, Time),
}

/// Tie-breaking among open states with equal `f` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Smallest vertex id first.
    #[default]
    Deterministic,
    /// Pseudo-random order keyed on `(vertex, time, salt)`.
    Salted(u64),
}

impl TieBreak {
    fn key(self, v: VertexId, t: Time) -> u64 {
        match self {
            TieBreak::Deterministic => u64::from(v.0),
            TieBreak::Salted(salt) => splitmix64(salt ^ vt_key(v, t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRequest {
    pub agent: AgentId,
    pub start: VertexId,
    pub start_time: Time,
    /// Goals visited in order; the agent rests at the last one.
    pub goals: Vec<VertexId>,
    /// Radius the resulting path will be installed with.
    pub k: u32,
    pub tie_break: TieBreak,
}

impl PlanRequest {
    pub fn new(agent: AgentId, start: VertexId, start_time: Time, goals: Vec<VertexId>) -> Self {
        assert!(!goals.is_empty(), "plan request without goals");
        PlanRequest { agent, start, start_time, goals, k: 0, tie_break: TieBreak::Deterministic }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }
}

/// Search cap: the later of `start_time` and the table's last constraint,
/// plus `4 * (width + height)` per goal leg.
pub fn default_horizon(map: &GridMap, start_time: Time, legs: usize, table: &ConstraintTable) -> Time {
    let per_leg = 4 * (map.width() + map.height());
    start_time.max(table.max_time()) + per_leg * legs.max(1) as Time
}

/// Minimum-arrival-time path through `req.goals` in order that violates no
/// constraint of any agent other than `req.agent`, ending on a vertex where
/// the agent can rest indefinitely. `None` if no such path reaches its last
/// goal by `horizon`.
pub fn plan_path(map: &GridMap, req: &PlanRequest, table: &ConstraintTable, horizon: Time) -> Option<Path> {
    let stages: Vec<Stage> = req.goals.iter().map(|&g| Stage::One(g)).collect();
    search(map, req.agent, req.start, req.start_time, &stages, table, horizon, req.tie_break)
}

/// Path to the nearest endpoint (by arrival time) that is not reserved and
/// not the resting vertex of another agent's path.
pub fn plan_idle(
    map: &GridMap,
    agent: AgentId,
    loc: VertexId,
    start_time: Time,
    table: &ConstraintTable,
    reserved: &BTreeSet<VertexId>,
    tie_break: TieBreak,
) -> Option<Path> {
    let targets: Vec<VertexId> = map
        .endpoints()
        .iter()
        .copied()
        .filter(|v| !reserved.contains(v) && table.resting_owner(*v, Some(agent)).is_none())
        .collect();
    if targets.is_empty() {
        return None;
    }
    let horizon = default_horizon(map, start_time, 1, table);
    search(map, agent, loc, start_time, &[Stage::Any(targets)], table, horizon, tie_break)
}

enum Stage {
    One(VertexId),
    Any(Vec<VertexId>),
}

impl Stage {
    fn contains(&self, v: VertexId) -> bool {
        match self {
            Stage::One(g) => *g == v,
            Stage::Any(gs) => gs.contains(&v),
        }
    }

    fn dist(&self, map: &GridMap, v: VertexId) -> u32 {
        match self {
            Stage::One(g) => map.dist(v, *g),
            Stage::Any(gs) => gs.iter().map(|&g| map.dist(v, g)).min().unwrap_or(0),
        }
    }
}

struct Node {
    v: VertexId,
    t: Time,
    stage: u8,
    parent: u32,
}

#[derive(PartialEq, Eq)]
struct Open {
    f: u32,
    g: u32,
    waited: bool,
    tie: u64,
    node: u32,
}

impl Ord for Open {
    // BinaryHeap pops the greatest: smallest f, then deepest g, then moves
    // before waits, then smallest tie key, then earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then(self.g.cmp(&other.g))
            .then(other.waited.cmp(&self.waited))
            .then(other.tie.cmp(&self.tie))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    map: &GridMap,
    agent: AgentId,
    start: VertexId,
    t0: Time,
    stages: &[Stage],
    table: &ConstraintTable,
    horizon: Time,
    tie_break: TieBreak,
) -> Option<Path> {
    assert!(!stages.is_empty() && stages.len() < 255);
    assert!(horizon < (1 << 24), "horizon too large");
    // the start vertex is taken as given and not checked against the table
    if !map.is_valid(start) {
        return None;
    }
    let ignore = Some(agent);
    let last = stages.len() - 1;
    // sum of leg lengths after each stage, for the heuristic
    let mut tail = vec![0u32; stages.len()];
    for i in (0..last).rev() {
        tail[i] = tail[i + 1]
            + match (&stages[i], &stages[i + 1]) {
                (Stage::One(a), Stage::One(b)) => map.dist(*a, *b),
                _ => 0,
            };
    }
    let h = |v: VertexId, stage: u8| -> u32 {
        let s = stage as usize;
        stages[s].dist(map, v) + tail[s]
    };
    let static_after = t0.max(table.max_time()) + 1;
    let key = |v: VertexId, t: Time, stage: u8| -> u64 {
        (u64::from(v.0) << 32) | (u64::from(t.min(static_after)) << 8) | u64::from(stage)
    };
    let advance = |mut stage: u8, v: VertexId| -> u8 {
        while (stage as usize) < last && stages[stage as usize].contains(v) {
            stage += 1;
        }
        stage
    };

    let mut nodes = vec![Node { v: start, t: t0, stage: advance(0, start), parent: u32::MAX }];
    let mut open = BinaryHeap::new();
    let mut best_g: HashMap<u64, u32> = HashMap::new();
    let mut closed = std::collections::HashSet::new();
    best_g.insert(key(start, t0, nodes[0].stage), 0);
    open.push(Open { f: h(start, nodes[0].stage), g: 0, waited: false, tie: tie_break.key(start, t0), node: 0 });

    while let Some(Open { g, node, .. }) = open.pop() {
        let (v, t, stage) = {
            let n = &nodes[node as usize];
            (n.v, n.t, n.stage)
        };
        if !closed.insert(key(v, t, stage)) {
            continue;
        }
        if stage as usize == last && stages[last].contains(v) && table.can_rest(v, t, ignore) {
            return Some(reconstruct(&nodes, node));
        }
        if t >= horizon {
            continue;
        }
        let nt = t + 1;
        let wait = std::iter::once(v);
        for u in wait.chain(map.adj(v).iter().copied()) {
            if table.vertex_forbidden(u, nt, ignore) {
                continue;
            }
            if u != v && table.edge_forbidden(v, u, nt, ignore) {
                continue;
            }
            let ns = advance(stage, u);
            let k = key(u, nt, ns);
            if closed.contains(&k) {
                continue;
            }
            let ng = g + 1;
            if best_g.get(&k).is_some_and(|&bg| bg <= ng) {
                continue;
            }
            best_g.insert(k, ng);
            let idx = nodes.len() as u32;
            nodes.push(Node { v: u, t: nt, stage: ns, parent: node });
            open.push(Open { f: ng + h(u, ns), g: ng, waited: u == v, tie: tie_break.key(u, nt), node: idx });
        }
    }
    None
}

fn reconstruct(nodes: &[Node], goal: u32) -> Path {
    let mut chain = Vec::new();
    let mut cur = goal;
    while cur != u32::MAX {
        chain.push(cur);
        cur = nodes[cur as usize].parent;
    }
    chain.reverse();
    let first = &nodes[chain[0] as usize];
    let mut marks = vec![0usize; first.stage as usize];
    let mut prev_stage = first.stage;
    let mut vertices = Vec::with_capacity(chain.len());
    for (i, &id) in chain.iter().enumerate() {
        let n = &nodes[id as usize];
        for _ in prev_stage..n.stage {
            marks.push(i);
        }
        prev_stage = n.stage;
        vertices.push(n.v);
    }
    marks.push(vertices.len() - 1);
    Path::new(first.t, vertices).with_goal_marks(marks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::parse_map;

    fn v(m: &GridMap, x: u32, y: u32) -> VertexId {
        m.vertex(x, y).unwrap()
    }

    #[test]
    fn trivial_when_start_is_goal() {
        let m = parse_map("3 3\n...\n...\n...\n").unwrap();
        let s = v(&m, 1, 1);
        let req = PlanRequest::new(AgentId(0), s, 4, vec![s]);
        let p = plan_path(&m, &req, &ConstraintTable::new(), 50).unwrap();
        assert_eq!(p.vertices(), &[s]);
        assert_eq!(p.start_time(), 4);
    }

    #[test]
    fn open_grid_shortest() {
        let m = parse_map("3 3\n...\n...\n...\n").unwrap();
        let req = PlanRequest::new(AgentId(0), v(&m, 0, 0), 0, vec![v(&m, 2, 2)]);
        let p = plan_path(&m, &req, &ConstraintTable::new(), 50).unwrap();
        assert_eq!(p.vertices().len(), 5);
        assert!(p.is_valid_on(&m));
    }

    #[test]
    fn waits_for_vertex_constraint() {
        let m = parse_map("3 1\n...\n").unwrap();
        let (a, b, c) = (v(&m, 0, 0), v(&m, 1, 0), v(&m, 2, 0));
        let mut table = ConstraintTable::new();
        table.vertex.entry(vt_key(b, 1)).or_default().add(AgentId(1));
        table.max_time = 1;
        let req = PlanRequest::new(AgentId(0), a, 0, vec![c]);
        let p = plan_path(&m, &req, &table, 50).unwrap();
        assert_eq!(p.vertices(), &[a, a, b, c]);
    }

    #[test]
    fn two_leg_goal_marks() {
        let m = parse_map("5 1\n.....\n").unwrap();
        let req = PlanRequest::new(AgentId(0), v(&m, 2, 0), 0, vec![v(&m, 0, 0), v(&m, 4, 0)]);
        let p = plan_path(&m, &req, &ConstraintTable::new(), 100).unwrap();
        assert_eq!(p.moves(), 6);
        assert_eq!(p.goal_marks(), &[2, 6]);
    }

    #[test]
    fn rejects_resting_goal_with_later_traffic() {
        // another agent passes the goal at t=5 and later parks on the start cell
        let m = parse_map("3 1\n...\n").unwrap();
        let (a, b) = (v(&m, 0, 0), v(&m, 1, 0));
        let mut table = ConstraintTable::new();
        table.insert(AgentId(1), &ConstraintSet { vertex: vec![(b, 5)], edge: vec![], rest: (a, 50) });
        let req = PlanRequest::new(AgentId(0), a, 0, vec![b]);
        let p = plan_path(&m, &req, &table, 100).unwrap();
        assert_eq!(p.last(), b);
        assert!(p.end_time() >= 5);
        assert!(table.violations(&p, Some(AgentId(0))).is_empty());
    }

    #[test]
    fn k_extension_worked_example() {
        let m = parse_map("3 1\n...\n").unwrap();
        let (v1, v2, v3) = (v(&m, 0, 0), v(&m, 1, 0), v(&m, 2, 0));
        let p = Path::new(1, vec![v1, v2, v3]);
        let ext = k_extension(&p, 1);
        let set = |xs: &[VertexId]| xs.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(ext.forbidden_at(1), set(&[v1, v2]));
        assert_eq!(ext.forbidden_at(2), set(&[v1, v2, v3]));
        assert_eq!(ext.forbidden_at(3), set(&[v2, v3]));
        assert_eq!(ext.forbidden_at(4), set(&[v3]));
        assert!(ext.forbidden_at(5).is_empty());
        assert_eq!(ext.rest, (v3, 3));
    }

    #[test]
    fn k_zero_is_own_occupancy() {
        let m = parse_map("3 1\n...\n").unwrap();
        let (v1, v2, v3) = (v(&m, 0, 0), v(&m, 1, 0), v(&m, 2, 0));
        let p = Path::new(0, vec![v1, v2, v3]);
        let ext = k_extension(&p, 0);
        assert_eq!(ext.vertex, vec![(v1, 0), (v2, 1), (v3, 2)]);
        assert_eq!(ext.edge, vec![(v2, v1, 1), (v3, v2, 2)]);
        assert_eq!(ext.rest, (v3, 2));
    }

    #[test]
    fn single_vertex_k2() {
        let p = Path::trivial(VertexId(4), 10);
        let ext = k_extension(&p, 2);
        assert_eq!(ext.vertex, vec![(VertexId(4), 10), (VertexId(4), 11), (VertexId(4), 12)]);
        assert!(ext.edge.is_empty());
    }

    #[test]
    fn idle_prefers_unreserved() {
        let m = parse_map("5 1\ne.d.e\n").unwrap();
        let loc = v(&m, 2, 0);
        let near = v(&m, 0, 0);
        let far = v(&m, 4, 0);
        let t = ConstraintTable::new();
        // both at distance 2; unreserved nearest by id wins
        let p = plan_idle(&m, AgentId(0), loc, 0, &t, &BTreeSet::new(), TieBreak::Deterministic).unwrap();
        assert_eq!(p.last(), near);
        let p = plan_idle(&m, AgentId(0), loc, 0, &t, &BTreeSet::from([near]), TieBreak::Deterministic).unwrap();
        assert_eq!(p.last(), far);
        assert!(plan_idle(&m, AgentId(0), loc, 0, &t, &BTreeSet::from([near, far]), TieBreak::Deterministic).is_none());
    }

    #[test]
    fn idle_on_free_endpoint_stays() {
        let m = parse_map("3 1\ne.e\n").unwrap();
        let e = v(&m, 0, 0);
        let p = plan_idle(&m, AgentId(0), e, 3, &ConstraintTable::new(), &BTreeSet::new(), TieBreak::Deterministic)
            .unwrap();
        assert_eq!(p.vertices(), &[e]);
    }

    #[test]
    fn idle_skips_other_rest_vertex() {
        let m = parse_map("5 1\ne.d.e\n").unwrap();
        let near = v(&m, 0, 0);
        let mut t = ConstraintTable::new();
        t.insert(AgentId(1), &k_extension(&Path::trivial(near, 0), 0));
        let p = plan_idle(&m, AgentId(0), v(&m, 2, 0), 0, &t, &BTreeSet::new(), TieBreak::Deterministic).unwrap();
        assert_eq!(p.last(), v(&m, 4, 0));
    }

    #[test]
    fn blocked_corridor_has_no_path() {
        let m = parse_map("3 1\n...\n").unwrap();
        let mut t = ConstraintTable::new();
        t.insert(AgentId(1), &k_extension(&Path::trivial(v(&m, 1, 0), 0), 0));
        let req = PlanRequest::new(AgentId(0), v(&m, 0, 0), 0, vec![v(&m, 2, 0)]);
        assert!(plan_path(&m, &req, &t, 200).is_none());
    }

    #[test]
    fn own_constraints_ignored() {
        let m = parse_map("3 1\n...\n").unwrap();
        let mut t = ConstraintTable::new();
        t.insert(AgentId(0), &k_extension(&Path::trivial(v(&m, 1, 0), 0), 3));
        let req = PlanRequest::new(AgentId(0), v(&m, 0, 0), 0, vec![v(&m, 2, 0)]);
        assert_eq!(plan_path(&m, &req, &t, 200).unwrap().moves(), 2);
    }
}
