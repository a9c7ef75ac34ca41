//! Token Passing for multi-agent pickup and delivery (MAPD) when execution
//! is perturbed by delays.
//!
//! The crate is organised bottom-up:
//!
//! - [`gridmap`]: 4-connected warehouse grids, the ASCII map format and
//!   static well-formedness checks.
//! - [`taskgen`]: tasks and seeded Poisson task streams.
//! - [`planner`]: space-time A* against a constraint table, k-extensions
//!   and the idle relocation planner.
//! - [`token`]: the shared planning state handed from agent to agent.
//! - [`robustness`]: the Markov delay model and path collision scores.
//! - [`engine`]: the time-stepped simulator and the TP, TP-with-replanning,
//!   k-TP and p-TP drivers.
//! - [`events`]: the line-oriented event log written by the engine.
//! - [`metrics`]: makespan, service time, replans and CSV rows.
//! - [`experiment`]: batch runs over seeds and algorithm grids, plus the
//!   post-hoc trace audit.

pub mod engine;
pub mod events;
pub mod experiment;
pub mod gridmap;
pub mod metrics;
pub mod planner;
pub mod robustness;
pub mod seed;
pub mod taskgen;
pub mod token;

use std::fmt;

/// Discrete simulation time step.
pub type Time = u32;

/// Index of an agent, `0..num_agents`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub use engine::{run_simulation, AlgorithmConfig, DelaySchedule, RunOutcome, Variant};
pub use gridmap::{GridMap, VertexId};
pub use planner::{ConstraintTable, Path};
pub use taskgen::{Task, TaskId, TaskStream};
pub use token::Token;
