//! Time-stepped simulation and the Token Passing variants.
//!
//! Each step `t` runs, in order:
//!
//! 1. release the tasks that arrived by `t`;
//! 2. draw the delayed set `D(t)` among agents that are moving;
//! 3. for replanning variants, detect one-step-ahead collisions and let the
//!    non-delayed agents involved replan (ascending id, several rounds if a
//!    replan creates new conflicts); agents that cannot replan take a
//!    short random walk; anything still conflicting is held in place;
//! 4. let every free agent, in ascending id, take the token: retry a task
//!    it could not plan for, pick the nearest eligible task, move out of
//!    the way, or keep resting;
//! 5. advance the execution traces and record pickups and completions.
//!
//! The variants differ only in what step 3 and 4 do: `Tp` never replans,
//! `KTp(k)` installs paths with k-extensions (`TpReplan` is `KTp(0)`), and
//! `PTp` rejects candidate paths whose collision score reaches `p`.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::events::{CollisionKind, Event};
use crate::gridmap::{GridMap, VertexId};
use crate::metrics::{compute_metrics, MetricsError, RunMetrics};
use crate::planner::{default_horizon, plan_idle, plan_path, Path, PlanRequest, TieBreak};
use crate::robustness::path_collision_prob;
use crate::taskgen::TaskStream;
use crate::token::{Progress, Token, TokenError};
use crate::{seed, AgentId, Time};

pub const DEFAULT_ITERMAX: u32 = 10;
pub const DEFAULT_WALK_LEN: usize = 5;
pub const DEFAULT_MAX_STEPS: Time = 100_000;
/// Steps over which a quota of delays is spread on average.
pub const QUOTA_SPAN: f64 = 300.0;
const WALK_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Tp,
    TpReplan,
    KTp { k: u32 },
    PTp { p: f64, p_d: f64, itermax: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    pub seed: u64,
}

impl AlgorithmConfig {
    pub fn tp() -> Self {
        AlgorithmConfig { variant: Variant::Tp, seed: 0 }
    }

    pub fn tp_replan() -> Self {
        AlgorithmConfig { variant: Variant::TpReplan, seed: 0 }
    }

    pub fn k_tp(k: u32) -> Self {
        AlgorithmConfig { variant: Variant::KTp { k }, seed: 0 }
    }

    pub fn p_tp(p: f64, p_d: f64) -> Self {
        AlgorithmConfig { variant: Variant::PTp { p, p_d, itermax: DEFAULT_ITERMAX }, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_itermax(mut self, n: u32) -> Self {
        if let Variant::PTp { itermax, .. } = &mut self.variant {
            *itermax = n;
        }
        self
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            Variant::Tp => "tp",
            Variant::TpReplan => "tp_replan",
            Variant::KTp { .. } => "k_tp",
            Variant::PTp { .. } => "p_tp",
        }
    }

    /// Radius used when installing paths.
    pub fn k(&self) -> u32 {
        match self.variant {
            Variant::KTp { k } => k,
            _ => 0,
        }
    }

    pub fn replans(&self) -> bool {
        !matches!(self.variant, Variant::Tp)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if let Variant::PTp { p, p_d, itermax } = self.variant {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("p = {p} outside [0, 1]")));
            }
            if !(p_d > 0.0 && p_d < 1.0) {
                return Err(SimError::Config(format!("p_d = {p_d} outside (0, 1)")));
            }
            if itermax == 0 {
                return Err(SimError::Config("itermax must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelayMode {
    /// Each agent suffers `per_agent` delays; while it has quota left, a
    /// moving agent is delayed with probability `p_inject` per step.
    Quota { per_agent: u32, p_inject: f64 },
    /// Exactly these `(agent, step)` pairs, when the agent is moving.
    Explicit(BTreeSet<(AgentId, Time)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySchedule {
    pub mode: DelayMode,
    pub seed: u64,
}

impl DelaySchedule {
    pub fn none() -> Self {
        DelaySchedule { mode: DelayMode::Quota { per_agent: 0, p_inject: 0.0 }, seed: 0 }
    }

    /// `per_agent` delays at rate `per_agent / 300`.
    pub fn quota(per_agent: u32, seed: u64) -> Self {
        Self::quota_with_rate(per_agent, f64::from(per_agent) / QUOTA_SPAN, seed)
    }

    pub fn quota_with_rate(per_agent: u32, p_inject: f64, seed: u64) -> Self {
        DelaySchedule { mode: DelayMode::Quota { per_agent, p_inject: p_inject.clamp(0.0, 1.0) }, seed }
    }

    pub fn explicit(pairs: impl IntoIterator<Item = (AgentId, Time)>) -> Self {
        DelaySchedule { mode: DelayMode::Explicit(pairs.into_iter().collect()), seed: 0 }
    }
}

/// Draws `D(t)` step by step.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    mode: DelayMode,
    remaining: Vec<u32>,
    rng: ChaCha8Rng,
}

impl DelaySampler {
    pub fn new(schedule: &DelaySchedule, agents: usize) -> Self {
        let quota = match schedule.mode {
            DelayMode::Quota { per_agent, .. } => per_agent,
            DelayMode::Explicit(_) => 0,
        };
        DelaySampler { mode: schedule.mode.clone(), remaining: vec![quota; agents], rng: seed::rng(schedule.seed) }
    }

    pub fn remaining(&self, a: AgentId) -> u32 {
        self.remaining[a.0]
    }

    /// `moving[i]` tells whether agent `i` is about to move. One uniform is
    /// drawn per agent per step whether or not it is used, so the
    /// schedule does not depend on what the agents do.
    pub fn sample(&mut self, t: Time, moving: &[bool]) -> BTreeSet<AgentId> {
        let mut out = BTreeSet::new();
        match &self.mode {
            DelayMode::Quota { p_inject, .. } => {
                for (i, &m) in moving.iter().enumerate() {
                    let u: f64 = self.rng.random();
                    if m && self.remaining[i] > 0 && u < *p_inject {
                        self.remaining[i] -= 1;
                        out.insert(AgentId(i));
                    }
                }
            }
            DelayMode::Explicit(pairs) => {
                for (i, &m) in moving.iter().enumerate() {
                    if m && pairs.contains(&(AgentId(i), t)) {
                        out.insert(AgentId(i));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionEvent {
    pub t: Time,
    pub kind: CollisionKind,
    pub agents: (AgentId, AgentId),
    /// Vertex both agents enter, or the vertex the first agent enters in a
    /// swap.
    pub at: VertexId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollisionCheck {
    /// Non-delayed agents involved in some collision.
    pub colliders: BTreeSet<AgentId>,
    pub events: Vec<CollisionEvent>,
}

/// One-step lookahead on the token: where every agent would be at `t + 1`
/// if `delayed` stay put and everybody else follows their path.
pub fn check_collisions(token: &Token, delayed: &BTreeSet<AgentId>) -> CollisionCheck {
    let t = token.now();
    let agents: Vec<AgentId> = token.agent_ids().filter(|&a| token.is_active(a)).collect();
    let here: Vec<VertexId> = agents.iter().map(|&a| token.location(a)).collect();
    let next: Vec<VertexId> = agents
        .iter()
        .map(|&a| if delayed.contains(&a) { token.location(a) } else { token.agent(a).next_vertex() })
        .collect();
    let mut out = CollisionCheck::default();
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            let kind = if next[i] == next[j] {
                CollisionKind::Vertex
            } else if next[i] == here[j] && next[j] == here[i] {
                CollisionKind::Swap
            } else {
                continue;
            };
            out.events.push(CollisionEvent { t, kind, agents: (agents[i], agents[j]), at: next[i] });
            for a in [agents[i], agents[j]] {
                if !delayed.contains(&a) {
                    out.colliders.insert(a);
                }
            }
        }
    }
    out
}

fn plan_once(map: &GridMap, token: &Token, a: AgentId, goals: Vec<VertexId>, k: u32, tie: TieBreak) -> Option<Path> {
    let table = token.cached_constraints();
    let legs = goals.len();
    let req = PlanRequest::new(a, token.location(a), token.now(), goals).with_k(k).with_tie_break(tie);
    plan_path(map, &req, table, default_horizon(map, token.now(), legs, table))
}

/// Plans a fresh path for the agent's current objective from where it
/// stands and installs it: the remaining task legs, the idle target, or a
/// safe resting place. Returns whether a path was installed.
pub fn replan_agent(token: &mut Token, agent: AgentId, map: &GridMap, config: &AlgorithmConfig) -> bool {
    let k = config.k();
    token.refresh_constraints();
    let now = token.now();
    let loc = token.location(agent);
    let path = if let Some(goals) = token.remaining_goals(agent) {
        plan_once(map, token, agent, goals, k, TieBreak::Deterministic)
    } else {
        let table = token.cached_constraints();
        let to_target = token
            .agent(agent)
            .idle_target()
            .filter(|_| !token.is_free(agent))
            .and_then(|g| plan_once(map, token, agent, vec![g], k, TieBreak::Deterministic));
        to_target.or_else(|| {
            if table.can_rest(loc, now, Some(agent)) {
                Some(Path::trivial(loc, now))
            } else {
                let reserved = token.reserved_vertices(agent);
                plan_idle(map, agent, loc, now, table, &reserved, TieBreak::Deterministic)
            }
        })
    };
    match path {
        Some(p) => {
            let idle = token.remaining_goals(agent).is_none() && !p.is_trivial();
            let target = p.last();
            token.install_path(agent, p, k).expect("planned from the agent's position");
            token.set_idle_target(agent, idle.then_some(target));
            true
        }
        None => false,
    }
}

/// Random collision-free walk of `len` steps for one agent, ending where
/// it can rest. At each step the next vertex is drawn uniformly from the
/// wait and move options the constraint table allows.
pub fn random_walk(map: &GridMap, token: &Token, agent: AgentId, len: usize, rng: &mut ChaCha8Rng) -> Option<Path> {
    let table = token.cached_constraints();
    let ignore = Some(agent);
    let t0 = token.now();
    for _ in 0..WALK_ATTEMPTS {
        let mut verts = vec![token.location(agent)];
        let mut ok = true;
        for step in 0..len {
            let v = *verts.last().expect("nonempty");
            let t = t0 + step as Time + 1;
            let options: Vec<VertexId> = std::iter::once(v)
                .chain(map.adj(v).iter().copied())
                .filter(|&u| {
                    !table.vertex_forbidden(u, t, ignore) && (u == v || !table.edge_forbidden(v, u, t, ignore))
                })
                .collect();
            match options.choose(rng) {
                Some(&u) => verts.push(u),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        let end_t = t0 + (verts.len() - 1) as Time;
        if ok && table.can_rest(*verts.last().expect("nonempty"), end_t, ignore) {
            return Some(Path::new(t0, verts));
        }
    }
    None
}

/// Gives every stuck agent a random walk, or a wait in place when no walk
/// is found. Assignments are kept. Returns the walk length per agent.
pub fn deadlock_recovery(
    token: &mut Token,
    map: &GridMap,
    stuck: &[AgentId],
    config: &AlgorithmConfig,
    walk_len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(AgentId, usize)> {
    let mut out = Vec::with_capacity(stuck.len());
    for &a in stuck {
        token.refresh_constraints();
        let walk = if walk_len == 0 { None } else { random_walk(map, token, a, walk_len, rng) };
        let path = walk.unwrap_or_else(|| Path::trivial(token.location(a), token.now()));
        out.push((a, path.moves()));
        token.install_path(a, path, config.k()).expect("walk starts at the agent");
        token.set_idle_target(a, None);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub max_steps: Time,
    pub walk_len: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_steps: DEFAULT_MAX_STEPS, walk_len: DEFAULT_WALK_LEN }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("map is not well-formed for {0} agents")]
    NotWellFormed(usize),
    #[error("no termination within {0} steps")]
    Livelock(Time),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub events: Vec<Event>,
    pub metrics: RunMetrics,
    /// Collisions detected in the token (for `Tp` they also happen).
    pub collisions: usize,
    pub delays: usize,
    pub forced_holds: usize,
    pub deadlocks: usize,
    pub steps: Time,
    pub token: Token,
}

/// Start vertices spread evenly over the parking endpoints, or over all
/// endpoints when there are more agents than parking spots.
pub fn default_starts(map: &GridMap, agents: usize) -> Result<Vec<VertexId>, SimError> {
    let parking = map.parking_endpoints();
    let pool: Vec<VertexId> = if parking.len() >= agents { parking } else { map.endpoints().iter().copied().collect() };
    if agents == 0 || pool.len() < agents {
        return Err(SimError::NotWellFormed(agents));
    }
    Ok((0..agents).map(|i| pool[i * pool.len() / agents]).collect())
}

struct Sim<'a> {
    map: &'a GridMap,
    stream: &'a TaskStream,
    config: AlgorithmConfig,
    opts: SimOptions,
    token: Token,
    sampler: DelaySampler,
    walk_rng: ChaCha8Rng,
    perturb_rng: ChaCha8Rng,
    events: Vec<Event>,
    collisions: usize,
    delays: usize,
    forced_holds: usize,
    deadlocks: usize,
}

impl Sim<'_> {
    fn xy(&self, v: VertexId) -> (u32, u32) {
        self.map.coord(v)
    }

    fn log_collisions(&mut self, check: &CollisionCheck) {
        for c in &check.events {
            self.collisions += 1;
            let at = self.xy(c.at);
            self.events.push(Event::Collision { t: c.t, agent: c.agents.0 .0, other: c.agents.1 .0, kind: c.kind, at });
        }
    }

    fn hold(&mut self, a: AgentId, forced: bool) {
        if self.token.mark_delayed(a) {
            let at = self.xy(self.token.location(a));
            self.events.push(Event::Delay { t: self.token.now(), agent: a.0, at, forced });
            if forced {
                self.forced_holds += 1;
            } else {
                self.delays += 1;
            }
        }
    }

    fn step(&mut self) -> Result<(), SimError> {
        let t = self.token.now();
        self.token.release_tasks(self.stream, t);
        let n = self.token.num_agents();

        let moving: Vec<bool> =
            self.token.agent_ids().map(|a| self.token.is_active(a) && !self.token.agent(a).at_path_end()).collect();
        let mut delayed = self.sampler.sample(t, &moving);
        for &a in &delayed {
            self.hold(a, false);
        }

        let check = check_collisions(&self.token, &delayed);
        self.log_collisions(&check);
        if self.config.replans() {
            let mut colliders = check.colliders;
            let mut rounds = 0;
            while !colliders.is_empty() && rounds <= n {
                let mut stuck = Vec::new();
                for &a in &colliders {
                    let ok = replan_agent(&mut self.token, a, self.map, &self.config);
                    self.events.push(Event::Replan { t, agent: a.0, ok });
                    if !ok {
                        stuck.push(a);
                    }
                }
                let walks = deadlock_recovery(
                    &mut self.token,
                    self.map,
                    &stuck,
                    &self.config,
                    self.opts.walk_len,
                    &mut self.walk_rng,
                );
                for (a, walk) in walks {
                    self.deadlocks += 1;
                    self.events.push(Event::Deadlock { t, agent: a.0, walk });
                }
                rounds += 1;
                let again = check_collisions(&self.token, &delayed);
                self.log_collisions(&again);
                colliders = again.colliders;
            }
            loop {
                let residual = check_collisions(&self.token, &delayed).colliders;
                let holds: Vec<AgentId> =
                    residual.into_iter().filter(|&a| !self.token.agent(a).at_path_end()).collect();
                if holds.is_empty() {
                    break;
                }
                for a in holds {
                    delayed.insert(a);
                    self.hold(a, true);
                }
            }
        }

        for a in (0..n).map(AgentId) {
            if self.token.is_free(a) {
                self.request(a)?;
            }
        }

        let moves = self.token.advance_traces(&delayed);
        for (a, from, to) in moves {
            self.events.push(Event::Move { t: t + 1, agent: a.0, from: self.xy(from), to: self.xy(to) });
        }
        for a in (0..n).map(AgentId) {
            if self.token.is_active(a) {
                if let Some(Progress::Completed(task)) = self.token.update_progress(a)? {
                    self.events.push(Event::Complete { t: t + 1, agent: a.0, task: task.0 });
                }
            }
        }
        Ok(())
    }

    /// The agent holds the token: the body of the Token Passing loop.
    fn request(&mut self, a: AgentId) -> Result<(), SimError> {
        let k = self.config.k();
        let t = self.token.now();
        if self.token.remaining_goals(a).is_none() {
            if let Some(task) = self.token.nearest_eligible(self.map, a) {
                self.token.assign(a, task)?;
                let tk = self.token.task(task).expect("released").clone();
                self.events.push(Event::Assign {
                    t,
                    agent: a.0,
                    task: task.0,
                    pickup: self.xy(tk.pickup),
                    delivery: self.xy(tk.delivery),
                });
                self.token.update_progress(a)?;
            }
        }
        if let Some(goals) = self.token.remaining_goals(a) {
            if let Some(path) = self.plan_gated(a, |map, token, tie| plan_once(map, token, a, goals.clone(), k, tie)) {
                self.token.install_path(a, path, k)?;
            }
            return Ok(());
        }
        self.token.set_idle_target(a, None);
        if self.token.must_vacate(self.map, a) {
            let reserved = self.token.reserved_vertices(a);
            let loc = self.token.location(a);
            let idle = self.plan_gated(a, |map, token, tie| {
                plan_idle(map, a, loc, token.now(), token.cached_constraints(), &reserved, tie)
            });
            if let Some(path) = idle {
                let target = path.last();
                self.token.install_path(a, path, k)?;
                self.token.set_idle_target(a, Some(target));
            }
        }
        Ok(())
    }

    /// Runs `plan`, and for p-TP keeps asking for new candidates with
    /// perturbed tie-breaking until one scores below `p` or `itermax`
    /// candidates have been rejected.
    fn plan_gated(
        &mut self,
        a: AgentId,
        mut plan: impl FnMut(&GridMap, &Token, TieBreak) -> Option<Path>,
    ) -> Option<Path> {
        self.token.refresh_constraints();
        match self.config.variant {
            Variant::PTp { p, p_d, itermax } if p < 1.0 => {
                for attempt in 0..itermax {
                    let tie = if attempt == 0 {
                        TieBreak::Deterministic
                    } else {
                        TieBreak::Salted(self.perturb_rng.random())
                    };
                    let path = plan(self.map, &self.token, tie)?;
                    if path_collision_prob(path.vertices(), &self.token, a, p_d) < p {
                        return Some(path);
                    }
                }
                None
            }
            _ => plan(self.map, &self.token, TieBreak::Deterministic),
        }
    }
}

/// Runs one MAPD instance to completion.
pub fn run_simulation(
    map: &GridMap,
    stream: &TaskStream,
    starts: &[VertexId],
    config: &AlgorithmConfig,
    delays: &DelaySchedule,
    opts: &SimOptions,
) -> Result<RunOutcome, SimError> {
    config.validate()?;
    if !map.check_well_formed(starts.len()).endpoints_connected() {
        return Err(SimError::NotWellFormed(starts.len()));
    }
    let clock = Instant::now();
    let token = Token::new(map, starts)?;
    let mut sim = Sim {
        map,
        stream,
        config: *config,
        opts: *opts,
        sampler: DelaySampler::new(delays, starts.len()),
        token,
        walk_rng: seed::rng(config.seed),
        perturb_rng: seed::rng(seed::derive(config.seed, "perturb")),
        events: Vec::new(),
        collisions: 0,
        delays: 0,
        forced_holds: 0,
        deadlocks: 0,
    };
    while !sim.token.all_done(stream) {
        if sim.token.now() >= opts.max_steps {
            return Err(SimError::Livelock(opts.max_steps));
        }
        sim.step()?;
    }
    let mut metrics = compute_metrics(&sim.events, stream)?;
    metrics.runtime_s = clock.elapsed().as_secs_f64();
    Ok(RunOutcome {
        metrics,
        collisions: sim.collisions,
        delays: sim.delays,
        forced_holds: sim.forced_holds,
        deadlocks: sim.deadlocks,
        steps: sim.token.now(),
        events: sim.events,
        token: sim.token,
    })
}
