//! The token: shared planning state lent to one agent at a time.
//!
//! For every agent it records the installed path, the execution trace
//! realised so far and the current assignment. The constraint table seen by
//! the planner is the union of the k-extensions of all installed paths,
//! each shifted by the delays its agent has accumulated since the path was
//! installed.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::gridmap::{GridMap, VertexId};
use crate::planner::{k_extension, ConstraintSet, ConstraintTable, Path};
use crate::taskgen::{Task, TaskError, TaskId, TaskState, TaskStream};
use crate::{AgentId, Time};

pub const MAX_AGENTS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum TokenError {
    #[error("at least one agent is required")]
    NoAgents,
    #[error("{0} agents exceed the supported maximum of {MAX_AGENTS}")]
    TooManyAgents(usize),
    #[error("agents {0} and {1} start on the same vertex")]
    SharedStart(AgentId, AgentId),
    #[error("start vertex {0:?} of agent {1} is not a free cell")]
    InvalidStart(VertexId, AgentId),
    #[error("agent {0} is not registered")]
    UnknownAgent(AgentId),
    #[error("task {0} has not been released")]
    UnknownTask(TaskId),
    #[error("path for agent {agent} starts at {found:?}/t={found_t}, agent is at {expected:?}/t={now}")]
    DetachedPath { agent: AgentId, expected: VertexId, found: VertexId, now: Time, found_t: Time },
    #[error("agent {0} already holds task {1}")]
    AlreadyAssigned(AgentId, TaskId),
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// Progress recorded when an agent reaches a task vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    PickedUp(TaskId),
    Completed(TaskId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    path: Path,
    idx: usize,
    lag: u32,
    k: u32,
    trace: Vec<VertexId>,
    active: bool,
    task: Option<TaskId>,
    picked_up: bool,
    idle_target: Option<VertexId>,
}

impl AgentState {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Index into the installed path of the agent's current vertex.
    pub fn index(&self) -> usize {
        self.idx
    }

    /// Delays suffered since the current path was installed.
    pub fn lag(&self) -> u32 {
        self.lag
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Realised vertices from time 0 up to now.
    pub fn trace(&self) -> &[VertexId] {
        &self.trace
    }

    pub fn task(&self) -> Option<TaskId> {
        self.task
    }

    pub fn picked_up(&self) -> bool {
        self.picked_up
    }

    pub fn idle_target(&self) -> Option<VertexId> {
        self.idle_target
    }

    pub fn location(&self) -> VertexId {
        self.path.vertices()[self.idx]
    }

    pub fn at_path_end(&self) -> bool {
        self.idx == self.path.moves()
    }

    /// Next vertex if the agent is not delayed.
    pub fn next_vertex(&self) -> VertexId {
        self.path.vertices()[(self.idx + 1).min(self.path.moves())]
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    agents: Vec<AgentState>,
    tasks: Vec<Task>,
    now: Time,
    table: Option<ConstraintTable>,
}

impl Token {
    /// All agents rest on their start vertices at time 0.
    pub fn new(map: &GridMap, starts: &[VertexId]) -> Result<Self, TokenError> {
        if starts.is_empty() {
            return Err(TokenError::NoAgents);
        }
        if starts.len() > MAX_AGENTS {
            return Err(TokenError::TooManyAgents(starts.len()));
        }
        for (i, &v) in starts.iter().enumerate() {
            if !map.is_valid(v) {
                return Err(TokenError::InvalidStart(v, AgentId(i)));
            }
            if let Some(j) = starts[..i].iter().position(|&u| u == v) {
                return Err(TokenError::SharedStart(AgentId(j), AgentId(i)));
            }
        }
        let agents = starts
            .iter()
            .map(|&v| AgentState {
                path: Path::trivial(v, 0),
                idx: 0,
                lag: 0,
                k: 0,
                trace: vec![v],
                active: true,
                task: None,
                picked_up: false,
                idle_target: None,
            })
            .collect();
        Ok(Token { agents, tasks: Vec::new(), now: 0, table: None })
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn agent(&self, a: AgentId) -> &AgentState {
        &self.agents[a.0]
    }

    pub fn location(&self, a: AgentId) -> VertexId {
        self.agents[a.0].location()
    }

    pub fn is_active(&self, a: AgentId) -> bool {
        self.agents[a.0].active
    }

    /// Registered and at the end of its path.
    pub fn is_free(&self, a: AgentId) -> bool {
        let s = &self.agents[a.0];
        s.active && s.at_path_end()
    }

    /// Path vertices from the agent's current position on.
    pub fn remaining_path(&self, a: AgentId) -> &[VertexId] {
        let s = &self.agents[a.0];
        &s.path.vertices()[s.idx..]
    }

    /// Installed path re-timed by the agent's delays.
    pub fn anchored_path(&self, a: AgentId) -> Path {
        let s = &self.agents[a.0];
        s.path.retimed(s.path.start_time() + s.lag)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(id.0)
    }

    pub fn pending_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(|t| t.state == TaskState::Pending)
    }

    /// Adds the stream's tasks that have arrived by `t`.
    pub fn release_tasks(&mut self, stream: &TaskStream, t: Time) -> Vec<TaskId> {
        let fresh = stream.pending_at(t, self.tasks.len());
        let ids = fresh.iter().map(|t| t.id).collect();
        self.tasks.extend_from_slice(fresh);
        ids
    }

    /// All released tasks are completed and nobody holds one.
    pub fn all_done(&self, stream: &TaskStream) -> bool {
        self.tasks.len() == stream.len()
            && self.tasks.iter().all(|t| matches!(t.state, TaskState::Completed(_)))
            && self.agents.iter().all(|s| s.task.is_none())
    }

    /// Pending tasks whose pickup and delivery are not where another
    /// agent's path ends.
    pub fn eligible_tasks(&self, a: AgentId) -> Vec<TaskId> {
        let ends: BTreeSet<VertexId> =
            self.agent_ids().filter(|&b| b != a && self.is_active(b)).map(|b| self.agents[b.0].path.last()).collect();
        self.pending_tasks()
            .filter(|t| !ends.contains(&t.pickup) && !ends.contains(&t.delivery))
            .map(|t| t.id)
            .collect()
    }

    /// Eligible task with the nearest pickup, lowest id on ties.
    pub fn nearest_eligible(&self, map: &GridMap, a: AgentId) -> Option<TaskId> {
        let loc = self.location(a);
        self.eligible_tasks(a).into_iter().min_by_key(|id| (map.dist(loc, self.tasks[id.0].pickup), *id))
    }

    pub fn assign(&mut self, a: AgentId, id: TaskId) -> Result<(), TokenError> {
        self.check_agent(a)?;
        if let Some(held) = self.agents[a.0].task {
            return Err(TokenError::AlreadyAssigned(a, held));
        }
        let task = self.tasks.get_mut(id.0).ok_or(TokenError::UnknownTask(id))?;
        task.assign(a)?;
        let s = &mut self.agents[a.0];
        s.task = Some(id);
        s.picked_up = false;
        s.idle_target = None;
        Ok(())
    }

    /// Goals still to visit for the agent's task: pickup then delivery, or
    /// only the delivery once the item is on board.
    pub fn remaining_goals(&self, a: AgentId) -> Option<Vec<VertexId>> {
        let s = &self.agents[a.0];
        let task = &self.tasks[s.task?.0];
        Some(if s.picked_up { vec![task.delivery] } else { vec![task.pickup, task.delivery] })
    }

    /// Replaces the agent's path. The path must start where and when the
    /// agent is now; it is installed with robustness radius `k`.
    pub fn install_path(&mut self, a: AgentId, path: Path, k: u32) -> Result<(), TokenError> {
        self.check_agent(a)?;
        let loc = self.location(a);
        if path.first() != loc || path.start_time() != self.now {
            return Err(TokenError::DetachedPath {
                agent: a,
                expected: loc,
                found: path.first(),
                now: self.now,
                found_t: path.start_time(),
            });
        }
        let s = &mut self.agents[a.0];
        s.path = path;
        s.idx = 0;
        s.lag = 0;
        s.k = k;
        self.table = None;
        Ok(())
    }

    /// Assigns `id` and installs `path` in one step.
    pub fn assign_and_install(&mut self, a: AgentId, id: TaskId, path: Path, k: u32) -> Result<(), TokenError> {
        self.assign(a, id)?;
        self.install_path(a, path, k)
    }

    pub fn set_idle_target(&mut self, a: AgentId, target: Option<VertexId>) {
        self.agents[a.0].idle_target = target;
    }

    /// Records that the agent will not move on the coming step. Agents at
    /// the end of their path are resting anyway; returns whether the delay
    /// took effect.
    pub fn mark_delayed(&mut self, a: AgentId) -> bool {
        let s = &mut self.agents[a.0];
        if !s.active || s.at_path_end() {
            return false;
        }
        s.lag += 1;
        self.table = None;
        true
    }

    /// Moves time forward one step. Delayed agents and agents at the end of
    /// their path repeat their vertex; everybody else takes the next path
    /// vertex. Returns `(agent, from, to)` for every registered agent.
    pub fn advance_traces(&mut self, delayed: &BTreeSet<AgentId>) -> Vec<(AgentId, VertexId, VertexId)> {
        let mut moves = Vec::with_capacity(self.agents.len());
        for (i, s) in self.agents.iter_mut().enumerate() {
            if !s.active {
                continue;
            }
            let from = s.location();
            if !delayed.contains(&AgentId(i)) && !s.at_path_end() {
                s.idx += 1;
            }
            let to = s.location();
            s.trace.push(to);
            moves.push((AgentId(i), from, to));
        }
        self.now += 1;
        moves
    }

    /// Applies pickup and completion for an agent standing on a task
    /// vertex at the current time.
    pub fn update_progress(&mut self, a: AgentId) -> Result<Option<Progress>, TokenError> {
        let now = self.now;
        let loc = self.location(a);
        let s = &mut self.agents[a.0];
        let Some(id) = s.task else { return Ok(None) };
        let task = &mut self.tasks[id.0];
        if !s.picked_up {
            if loc == task.pickup {
                s.picked_up = true;
                return Ok(Some(Progress::PickedUp(id)));
            }
            return Ok(None);
        }
        if loc == task.delivery {
            task.complete(now)?;
            s.task = None;
            s.picked_up = false;
            return Ok(Some(Progress::Completed(id)));
        }
        Ok(None)
    }

    /// Vertices an idling agent must not settle on: endpoints of pending
    /// tasks and the outstanding goals of other agents' tasks.
    pub fn reserved_vertices(&self, a: AgentId) -> BTreeSet<VertexId> {
        let mut out: BTreeSet<VertexId> = self.pending_tasks().flat_map(|t| [t.pickup, t.delivery]).collect();
        for b in self.agent_ids().filter(|&b| b != a && self.is_active(b)) {
            out.extend(self.remaining_goals(b).unwrap_or_default());
        }
        out
    }

    /// A free agent has to leave its vertex when it is not an endpoint, is
    /// the delivery of a pending task, or is a goal another agent still
    /// has to reach.
    pub fn must_vacate(&self, map: &GridMap, a: AgentId) -> bool {
        let loc = self.location(a);
        !map.is_endpoint(loc)
            || self.pending_tasks().any(|t| t.delivery == loc)
            || self
                .agent_ids()
                .filter(|&b| b != a && self.is_active(b))
                .any(|b| self.remaining_goals(b).is_some_and(|g| g.contains(&loc)))
    }

    /// Rebuilds the cached constraint table if a path or lag changed.
    pub fn refresh_constraints(&mut self) {
        if self.table.is_none() {
            self.table = Some(self.build_constraints());
        }
    }

    /// The cached table; call [`Token::refresh_constraints`] first.
    pub fn cached_constraints(&self) -> &ConstraintTable {
        self.table.as_ref().expect("constraint table is stale; refresh_constraints first")
    }

    /// Union of the anchored k-extensions of all registered agents.
    pub fn constraints(&mut self) -> &ConstraintTable {
        self.refresh_constraints();
        self.cached_constraints()
    }

    pub fn build_constraints(&self) -> ConstraintTable {
        let sets: Vec<(AgentId, ConstraintSet)> = self
            .agent_ids()
            .filter(|&a| self.is_active(a))
            .map(|a| (a, k_extension(&self.anchored_path(a), self.agents[a.0].k)))
            .collect();
        ConstraintTable::from_sets(sets.iter().map(|(a, s)| (*a, s)))
    }

    /// Removes an agent from the system; its unfinished task returns to
    /// the pending pool.
    pub fn deregister(&mut self, a: AgentId) -> Result<Option<TaskId>, TokenError> {
        self.check_agent(a)?;
        let s = &mut self.agents[a.0];
        s.active = false;
        let released = s.task.take();
        s.picked_up = false;
        if let Some(id) = released {
            self.tasks[id.0].release()?;
        }
        self.table = None;
        Ok(released)
    }

    /// Line-oriented dump for debugging, one `agent` line per agent and one
    /// `task` line per released task. Coordinates are `x,y`.
    pub fn snapshot(&self, map: &GridMap) -> String {
        let xy = |v: VertexId| {
            let (x, y) = map.coord(v);
            format!("{x},{y}")
        };
        let mut out = format!("now={}\n", self.now);
        for (i, s) in self.agents.iter().enumerate() {
            let path: Vec<String> = s.path.vertices().iter().map(|&v| xy(v)).collect();
            let trace: Vec<String> = s.trace.iter().map(|&v| xy(v)).collect();
            let task = s.task.map_or("-".to_string(), |t| t.to_string());
            let _ = writeln!(
                out,
                "agent={i} active={} task={task} picked={} start={} idx={} lag={} k={} path={} trace={}",
                u8::from(s.active),
                u8::from(s.picked_up),
                s.path.start_time(),
                s.idx,
                s.lag,
                s.k,
                path.join(";"),
                trace.join(";"),
            );
        }
        for t in &self.tasks {
            let state = match t.state {
                TaskState::Pending => "pending".to_string(),
                TaskState::Assigned(a) => format!("assigned:{a}"),
                TaskState::Completed(c) => format!("completed:{c}"),
            };
            let _ = writeln!(
                out,
                "task={} arrival={} pickup={} delivery={} state={state}",
                t.id,
                t.arrival,
                xy(t.pickup),
                xy(t.delivery)
            );
        }
        out
    }

    fn check_agent(&self, a: AgentId) -> Result<(), TokenError> {
        match self.agents.get(a.0) {
            Some(s) if s.active => Ok(()),
            _ => Err(TokenError::UnknownAgent(a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::parse_map;

    fn corridor() -> GridMap {
        parse_map("4 1\ne..e\n").unwrap()
    }

    #[test]
    fn init_rests_everyone() {
        let m = corridor();
        let starts = [m.vertex(0, 0).unwrap(), m.vertex(3, 0).unwrap()];
        let tok = Token::new(&m, &starts).unwrap();
        for a in tok.agent_ids() {
            assert!(tok.is_free(a));
            assert_eq!(tok.agent(a).trace(), &[starts[a.0]]);
        }
        assert_eq!(
            Token::new(&m, &[starts[0], starts[0]]).unwrap_err(),
            TokenError::SharedStart(AgentId(0), AgentId(1))
        );
    }

    #[test]
    fn delayed_trace() {
        let m = corridor();
        let (v1, v2) = (m.vertex(0, 0).unwrap(), m.vertex(1, 0).unwrap());
        let mut tok = Token::new(&m, &[v1]).unwrap();
        tok.install_path(AgentId(0), Path::new(0, vec![v1, v2]), 0).unwrap();
        let a = AgentId(0);
        let once = BTreeSet::from([a]);
        for _ in 0..2 {
            assert!(tok.mark_delayed(a));
            tok.advance_traces(&once);
        }
        tok.advance_traces(&BTreeSet::new());
        tok.advance_traces(&once);
        assert_eq!(tok.agent(a).trace(), &[v1, v1, v1, v2, v2]);
        assert_eq!(tok.anchored_path(a).start_time(), 2);
    }

    #[test]
    fn rejects_detached_path() {
        let m = corridor();
        let v1 = m.vertex(0, 0).unwrap();
        let v2 = m.vertex(1, 0).unwrap();
        let mut tok = Token::new(&m, &[v1]).unwrap();
        assert!(tok.install_path(AgentId(0), Path::new(0, vec![v2]), 0).is_err());
        assert!(tok.install_path(AgentId(0), Path::new(1, vec![v1]), 0).is_err());
    }

    #[test]
    fn deregister_returns_task() {
        let m = corridor();
        let v = |x| m.vertex(x, 0).unwrap();
        let stream = TaskStream::from_tasks(vec![Task::new(TaskId(0), v(1), v(2), 0)]);
        let mut tok = Token::new(&m, &[v(0)]).unwrap();
        tok.release_tasks(&stream, 0);
        tok.assign(AgentId(0), TaskId(0)).unwrap();
        assert!(tok.eligible_tasks(AgentId(0)).is_empty());
        assert_eq!(tok.deregister(AgentId(0)).unwrap(), Some(TaskId(0)));
        assert_eq!(tok.task(TaskId(0)).unwrap().state, TaskState::Pending);
    }

    #[test]
    fn eligibility_excludes_other_path_ends() {
        let m = corridor();
        let v = |x| m.vertex(x, 0).unwrap();
        let stream =
            TaskStream::from_tasks(vec![Task::new(TaskId(0), v(1), v(3), 0), Task::new(TaskId(1), v(1), v(2), 0)]);
        let tok = {
            let mut t = Token::new(&m, &[v(0), v(3)]).unwrap();
            t.release_tasks(&stream, 0);
            t
        };
        assert_eq!(tok.eligible_tasks(AgentId(0)), vec![TaskId(1)]);
        assert_eq!(tok.eligible_tasks(AgentId(1)), vec![TaskId(0), TaskId(1)]);
    }

    #[test]
    fn rebuild_is_idempotent() {
        let m = corridor();
        let v = |x| m.vertex(x, 0).unwrap();
        let mut tok = Token::new(&m, &[v(0), v(3)]).unwrap();
        tok.install_path(AgentId(0), Path::new(0, vec![v(0), v(1), v(2)]), 2).unwrap();
        let first = tok.build_constraints();
        assert_eq!(first, tok.build_constraints());
        assert_eq!(tok.constraints(), &first);
    }
}
