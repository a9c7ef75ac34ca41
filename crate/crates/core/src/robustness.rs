//! Markov delay model and collision scores.
//!
//! An agent following a path of `n` moves is modelled as a chain over path
//! indices `0..=n`: each step it stays put with probability `p_d` and
//! advances with probability `1 - p_d`; the last index is absorbing. Chains
//! of different agents are independent.

use crate::gridmap::VertexId;
use crate::token::Token;
use crate::AgentId;

/// Delay chain for one path of `moves` actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayChain {
    p_d: f64,
    moves: usize,
}

impl DelayChain {
    pub fn new(p_d: f64, moves: usize) -> Self {
        assert!((0.0..=1.0).contains(&p_d), "delay probability {p_d} outside [0, 1]");
        DelayChain { p_d, moves }
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    pub fn states(&self) -> usize {
        self.moves + 1
    }

    /// Row `r` of the transition matrix.
    pub fn transition_row(&self, r: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.states()];
        if r == self.moves {
            row[r] = 1.0;
        } else {
            row[r] = self.p_d;
            row[r + 1] = 1.0 - self.p_d;
        }
        row
    }

    pub fn start(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.states()];
        s[0] = 1.0;
        s
    }

    /// One multiplication `s P` exploiting the bidiagonal structure.
    pub fn step(&self, s: &[f64]) -> Vec<f64> {
        let n = self.moves;
        let mut out = vec![0.0; s.len()];
        for r in 0..n {
            out[r] += s[r] * self.p_d;
            out[r + 1] += s[r] * (1.0 - self.p_d);
        }
        out[n] += s[n];
        out
    }

    /// Distribution over path indices after `j` steps.
    pub fn occupancy(&self, j: usize) -> Vec<f64> {
        let mut s = self.start();
        for _ in 0..j {
            if s[self.moves] == 1.0 {
                break;
            }
            s = self.step(&s);
        }
        s
    }

    /// Distributions for steps `0..=steps`.
    pub fn occupancy_rows(&self, steps: usize) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(steps + 1);
        rows.push(self.start());
        for j in 0..steps {
            let next = self.step(&rows[j]);
            rows.push(next);
        }
        rows
    }
}

/// Probability that `p_d`-delayed traversal of an `n`-move path is at each
/// index after `j` steps.
pub fn occupancy(p_d: f64, moves: usize, j: usize) -> Vec<f64> {
    DelayChain::new(p_d, moves).occupancy(j)
}

/// `[1 - prod(1 - q_o)] * self_prob`: the agent is at the vertex and at
/// least one other agent is too.
pub fn vertex_collision_prob(self_prob: f64, others: &[f64]) -> f64 {
    let none = others.iter().fold(1.0, |acc, q| acc * (1.0 - q));
    (1.0 - none) * self_prob
}

/// Sum over the candidate's positions `j = 0..=n` of the collision
/// probability at `(candidate[j], now + j)`. The candidate starts now; a
/// one-element sequence is an agent resting for good.
pub fn collision_score(candidate: &[VertexId], others: &[&[VertexId]], p_d: f64) -> f64 {
    let aligned: Vec<(&[VertexId], usize)> = others.iter().map(|o| (*o, 0)).collect();
    collision_score_aligned(candidate, &aligned, p_d)
}

/// Like [`collision_score`], but each other path `(verts, offset)` started
/// `offset` steps before now, so its chain has already run that long.
pub fn collision_score_aligned(candidate: &[VertexId], others: &[(&[VertexId], usize)], p_d: f64) -> f64 {
    assert!(!candidate.is_empty());
    let n = candidate.len() - 1;
    let own = DelayChain::new(p_d, n).occupancy_rows(n);
    let other_rows: Vec<Vec<Vec<f64>>> = others
        .iter()
        .map(|(o, offset)| {
            let rows = DelayChain::new(p_d, o.len() - 1).occupancy_rows(offset + n);
            rows.into_iter().skip(*offset).collect()
        })
        .collect();
    let mass = |verts: &[VertexId], row: &[f64], v: VertexId| -> f64 {
        verts.iter().zip(row).filter(|(u, _)| **u == v).map(|(_, p)| p).sum()
    };
    let mut total = 0.0;
    let mut qs = Vec::with_capacity(others.len());
    for (j, &v) in candidate.iter().enumerate() {
        let self_prob = mass(candidate, &own[j], v);
        qs.clear();
        qs.extend(others.iter().zip(&other_rows).map(|((o, _), rows)| mass(o, &rows[j], v)));
        total += vertex_collision_prob(self_prob, &qs);
    }
    total
}

/// Score of a candidate path for `agent` against the other agents in the
/// token. A moving agent's chain runs from the (delay-adjusted) start of
/// its installed path, so it is `now - start` steps along; an agent at the
/// end of its path sits on its rest vertex with certainty.
pub fn path_collision_prob(candidate: &[VertexId], token: &Token, agent: AgentId, p_d: f64) -> f64 {
    let now = token.now();
    let others: Vec<(&[VertexId], usize)> = token
        .agent_ids()
        .filter(|&a| a != agent && token.is_active(a))
        .map(|a| {
            if token.is_free(a) {
                (token.remaining_path(a), 0)
            } else {
                let st = token.agent(a);
                let anchor = st.path().start_time() + st.lag();
                (st.path().vertices(), now.saturating_sub(anchor) as usize)
            }
        })
        .collect();
    collision_score_aligned(candidate, &others, p_d)
}
