//! Markov delay model: occupancy distributions and collision scores.

use tokenpass::gridmap::VertexId;
use tokenpass::robustness::{collision_score, occupancy, vertex_collision_prob};

fn main() {
    println!("single vertex, own 0.6 and others [0.3, 0.5]: {:.4}", vertex_collision_prob(0.6, &[0.3, 0.5]));

    let p_d = 0.1;
    for j in 0..4 {
        let row: Vec<String> = occupancy(p_d, 3, j).iter().map(|p| format!("{p:.3}")).collect();
        println!("three moves, after {j} steps: [{}]", row.join(", "));
    }

    // two agents crossing the same cell one step apart
    let a: Vec<VertexId> = [0, 1, 2, 3].map(VertexId).to_vec();
    let b: Vec<VertexId> = [5, 4, 2, 6].map(VertexId).to_vec();
    let c: Vec<VertexId> = [5, 5, 4, 2, 6].map(VertexId).to_vec();
    for pd in [0.02, 0.1, 0.3] {
        println!(
            "p_d={pd}: same-time crossing {:.4}, one step apart {:.4}",
            collision_score(&b, &[&a], pd),
            collision_score(&c, &[&a], pd)
        );
    }
}
