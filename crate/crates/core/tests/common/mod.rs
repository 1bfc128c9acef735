#![allow(dead_code)]

use causalflow::network::{LinearNetwork, ValidatedNetwork};
use rand::Rng;

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Random DAG on `n` nodes named `v0..`; node `i` may only feed nodes `j > i`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, edge_prob: f64) -> ValidatedNetwork {
    let mut net = LinearNetwork::new();
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    for name in &names {
        let noise = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.1..5.0) };
        net = net.node(name, rng.random_range(0.05..2.0), noise);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(edge_prob) {
                let g = rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                net = net.edge(&names[i], &names[j], g);
            }
        }
    }
    // a noiseless root would be rejected; give roots noise
    let mut spec = net;
    let has_parent: Vec<bool> = (0..n)
        .map(|j| spec.edges.iter().any(|e| e.target == names[j]))
        .collect();
    for (j, node) in spec.nodes.iter_mut().enumerate() {
        if !has_parent[j] && node.noise == 0.0 {
            node.noise = 1.0;
        }
    }
    spec.validate().expect("random DAG is valid")
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    causalflow::verify::log_grid(lo, hi, n)
}
