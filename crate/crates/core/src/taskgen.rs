//! Tasks and seeded task streams.

use std::fmt;

use rand::seq::IteratorRandom;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::gridmap::{GridMap, VertexId};
use crate::{seed, AgentId, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Pending,
    Assigned(AgentId),
    Completed(Time),
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("map has no pickup candidates")]
    NoPickups,
    #[error("map has no delivery candidates")]
    NoDeliveries,
    #[error("pickup and delivery candidates are a single shared vertex")]
    DegenerateCandidates,
    #[error("task count must be at least 1")]
    ZeroCount,
    #[error("arrival rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("task {0}: illegal transition from {1:?}")]
    BadTransition(TaskId, TaskState),
    #[error("task {0}: completion at {1} precedes arrival")]
    EarlyCompletion(TaskId, Time),
    #[error("task file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A pickup-and-delivery request.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub pickup: VertexId,
    pub delivery: VertexId,
    pub arrival: Time,
    pub state: TaskState,
}

impl Task {
    pub fn new(id: TaskId, pickup: VertexId, delivery: VertexId, arrival: Time) -> Self {
        assert_ne!(pickup, delivery, "task pickup equals delivery");
        Task { id, pickup, delivery, arrival, state: TaskState::Pending }
    }

    pub fn assign(&mut self, agent: AgentId) -> Result<(), TaskError> {
        match self.state {
            TaskState::Pending => {
                self.state = TaskState::Assigned(agent);
                Ok(())
            }
            s => Err(TaskError::BadTransition(self.id, s)),
        }
    }

    pub fn complete(&mut self, t: Time) -> Result<(), TaskError> {
        match self.state {
            TaskState::Assigned(_) if t >= self.arrival => {
                self.state = TaskState::Completed(t);
                Ok(())
            }
            TaskState::Assigned(_) => Err(TaskError::EarlyCompletion(self.id, t)),
            s => Err(TaskError::BadTransition(self.id, s)),
        }
    }

    /// Returns an assigned task to the pending pool (agent removal only).
    pub fn release(&mut self) -> Result<(), TaskError> {
        match self.state {
            TaskState::Assigned(_) => {
                self.state = TaskState::Pending;
                Ok(())
            }
            s => Err(TaskError::BadTransition(self.id, s)),
        }
    }
}

/// Tasks sorted by arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    tasks: Vec<Task>,
    lambda: Option<f64>,
}

impl TaskStream {
    /// Wraps explicit tasks; they are sorted by arrival (stable) and
    /// renumbered in that order.
    pub fn from_tasks(mut tasks: Vec<Task>) -> Self {
        tasks.sort_by_key(|t| t.arrival);
        for (i, t) in tasks.iter_mut().enumerate() {
            t.id = TaskId(i);
            t.state = TaskState::Pending;
        }
        TaskStream { tasks, lambda: None }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn get(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(id.0)
    }

    pub fn last_arrival(&self) -> Option<Time> {
        self.tasks.last().map(|t| t.arrival)
    }

    /// Tasks with `arrival <= t` that are not among the first
    /// `already_added`, in id order.
    pub fn pending_at(&self, t: Time, already_added: usize) -> &[Task] {
        let start = already_added.min(self.tasks.len());
        let end = start + self.tasks[start..].iter().take_while(|task| task.arrival <= t).count();
        &self.tasks[start..end]
    }

    /// Task file: one `arrival pickup_x pickup_y delivery_x delivery_y` per
    /// line, `#` starts a comment.
    pub fn parse(text: &str, map: &GridMap) -> Result<Self, TaskError> {
        let mut tasks = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TaskError::Parse { line: line_no, msg };
            let nums: Vec<u32> = line
                .split_whitespace()
                .map(|s| s.parse::<u32>().map_err(|e| err(format!("{s:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            let [arrival, px, py, dx, dy] = nums[..] else {
                return Err(err(format!("expected 5 integers, found {}", nums.len())));
            };
            let pickup = map.vertex(px, py).map_err(|e| err(e.to_string()))?;
            let delivery = map.vertex(dx, dy).map_err(|e| err(e.to_string()))?;
            if pickup == delivery {
                return Err(err("pickup equals delivery".into()));
            }
            tasks.push(Task::new(TaskId(tasks.len()), pickup, delivery, arrival));
        }
        Ok(Self::from_tasks(tasks))
    }

    pub fn to_text(&self, map: &GridMap) -> String {
        let mut out = String::from("# arrival pickup_x pickup_y delivery_x delivery_y\n");
        for t in &self.tasks {
            let (px, py) = map.coord(t.pickup);
            let (dx, dy) = map.coord(t.delivery);
            out.push_str(&format!("{} {px} {py} {dx} {dy}\n", t.arrival));
        }
        out
    }
}

/// Draws `count` tasks. At every step `t = 0, 1, ...` the number of new
/// arrivals is Poisson(`lambda`); the final step is truncated so that
/// exactly `count` tasks are produced. Pickup and delivery are drawn
/// uniformly and independently from the candidate sets; an equal pair is
/// redrawn.
pub fn generate_tasks(map: &GridMap, count: usize, lambda: f64, seed: u64) -> Result<TaskStream, TaskError> {
    if count == 0 {
        return Err(TaskError::ZeroCount);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(TaskError::BadRate(lambda));
    }
    let pickups = map.pickup_candidates();
    let deliveries = map.delivery_candidates();
    if pickups.is_empty() {
        return Err(TaskError::NoPickups);
    }
    if deliveries.is_empty() {
        return Err(TaskError::NoDeliveries);
    }
    if pickups.len() == 1 && deliveries.len() == 1 && pickups.first() == deliveries.first() {
        return Err(TaskError::DegenerateCandidates);
    }
    let poisson = Poisson::new(lambda).map_err(|_| TaskError::BadRate(lambda))?;
    let mut rng = seed::rng(seed);
    let mut tasks = Vec::with_capacity(count);
    let mut t: Time = 0;
    while tasks.len() < count {
        let arrivals = poisson.sample(&mut rng) as usize;
        for _ in 0..arrivals.min(count - tasks.len()) {
            let (pickup, delivery) = loop {
                let p = *pickups.iter().choose(&mut rng).expect("nonempty");
                let d = *deliveries.iter().choose(&mut rng).expect("nonempty");
                if p != d {
                    break (p, d);
                }
            };
            tasks.push(Task::new(TaskId(tasks.len()), pickup, delivery, t));
        }
        t += 1;
    }
    Ok(TaskStream { tasks, lambda: Some(lambda) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::parse_map;

    fn warehouse() -> GridMap {
        parse_map(include_str!("../assets/maps/small_warehouse.map")).unwrap()
    }

    #[test]
    fn single_task() {
        let s = generate_tasks(&warehouse(), 1, 0.5, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_ne!(s.tasks()[0].pickup, s.tasks()[0].delivery);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = warehouse();
        assert_eq!(generate_tasks(&m, 50, 1.0, 11).unwrap(), generate_tasks(&m, 50, 1.0, 11).unwrap());
        assert_ne!(generate_tasks(&m, 50, 1.0, 11).unwrap(), generate_tasks(&m, 50, 1.0, 12).unwrap());
    }

    #[test]
    fn stream_invariants() {
        let m = warehouse();
        let s = generate_tasks(&m, 50, 3.0, 5).unwrap();
        assert_eq!(s.len(), 50);
        for w in s.tasks().windows(2) {
            assert!(w[0].arrival <= w[1].arrival);
        }
        for t in s.tasks() {
            assert!(m.pickup_candidates().contains(&t.pickup));
            assert!(m.delivery_candidates().contains(&t.delivery));
            assert_ne!(t.pickup, t.delivery);
        }
    }

    #[test]
    fn higher_rate_arrives_earlier() {
        let m = warehouse();
        let mean_last = |lambda: f64| {
            (0..100u64).map(|s| generate_tasks(&m, 50, lambda, s).unwrap().last_arrival().unwrap() as f64).sum::<f64>()
                / 100.0
        };
        assert!(mean_last(3.0) < mean_last(0.5));
    }

    #[test]
    fn errors() {
        let m = warehouse();
        assert_eq!(generate_tasks(&m, 0, 1.0, 0).unwrap_err(), TaskError::ZeroCount);
        assert!(matches!(generate_tasks(&m, 3, 0.0, 0), Err(TaskError::BadRate(_))));
        let bare = parse_map("3 1\ne.e\n").unwrap();
        assert_eq!(generate_tasks(&bare, 3, 1.0, 0).unwrap_err(), TaskError::NoPickups);
        let only_p = parse_map("3 1\nP.e\n").unwrap();
        assert_eq!(generate_tasks(&only_p, 3, 1.0, 0).unwrap_err(), TaskError::NoDeliveries);
    }

    #[test]
    fn pending_release() {
        let m = parse_map("4 1\nPDPD\n").unwrap();
        let v = |x| m.vertex(x, 0).unwrap();
        let s = TaskStream::from_tasks(vec![
            Task::new(TaskId(0), v(0), v(1), 0),
            Task::new(TaskId(1), v(2), v(3), 0),
            Task::new(TaskId(2), v(0), v(3), 2),
        ]);
        assert_eq!(s.pending_at(1, 0).len(), 2);
        assert_eq!(s.pending_at(1, 2).len(), 0);
        assert_eq!(s.pending_at(9, 2).len(), 1);
        let late = TaskStream::from_tasks(vec![Task::new(TaskId(0), v(0), v(1), 4)]);
        assert!(late.pending_at(3, 0).is_empty());
    }

    #[test]
    fn lifecycle() {
        let mut t = Task::new(TaskId(0), VertexId(0), VertexId(1), 5);
        assert!(t.complete(9).is_err());
        t.assign(AgentId(1)).unwrap();
        assert!(t.assign(AgentId(2)).is_err());
        assert_eq!(t.complete(4).unwrap_err(), TaskError::EarlyCompletion(TaskId(0), 4));
        t.complete(7).unwrap();
        assert_eq!(t.state, TaskState::Completed(7));
    }

    #[test]
    fn task_file_round_trip() {
        let m = warehouse();
        let s = generate_tasks(&m, 20, 1.0, 2).unwrap();
        let back = TaskStream::parse(&s.to_text(&m), &m).unwrap();
        assert_eq!(back.tasks(), s.tasks());
        assert!(matches!(TaskStream::parse("0 2 1 2\n", &m), Err(TaskError::Parse { line: 1, .. })));
        assert!(matches!(TaskStream::parse("# c\n0 2 2 2 1\n", &m), Err(TaskError::Parse { line: 2, .. })));
    }
}
