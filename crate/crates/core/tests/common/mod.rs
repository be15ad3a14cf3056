#![allow(dead_code)]

use nie_core::Graph;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random simple digraph; self-loops and repeated pairs are dropped.
pub fn graph_from_raw(n: usize, raw: &[(usize, usize, f64)]) -> Graph {
    let mut seen = std::collections::HashSet::new();
    let edges: Vec<_> = raw
        .iter()
        .map(|&(u, v, p)| (u % n, v % n, p))
        .filter(|&(u, v, _)| u != v && seen.insert((u, v)))
        .collect();
    Graph::from_edges(n, edges).unwrap()
}

pub fn arb_graph(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = Graph> {
    (2..=max_nodes).prop_flat_map(move |n| {
        prop::collection::vec((0..n, 0..n, 0.05f64..=1.0), 0..=max_edges)
            .prop_map(move |raw| graph_from_raw(n, &raw))
    })
}

pub fn random_graph(n: usize, max_edges: usize, rng: &mut ChaCha8Rng) -> Graph {
    let m = rng.random_range(0..=max_edges);
    let raw: Vec<_> = (0..m)
        .map(|_| {
            let p = if rng.random_bool(0.2) { 1.0 } else { rng.random_range(0.05..1.0) };
            (rng.random_range(0..n), rng.random_range(0..n), p)
        })
        .collect();
    graph_from_raw(n, &raw)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits `0..n` into a nonempty false seed set and a disjoint true seed set.
pub fn random_split(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut s_f = Vec::new();
    let mut s_t = Vec::new();
    for v in 0..n {
        match rng.random_range(0..4) {
            0 => s_f.push(v),
            1 => s_t.push(v),
            _ => {}
        }
    }
    if s_f.is_empty() {
        let v = rng.random_range(0..n);
        s_t.retain(|&u| u != v);
        s_f.push(v);
    }
    (s_f, s_t)
}

/// Full forward BFS distances from `sources`, `u32::MAX` for unreachable.
pub fn distances(graph: &Graph, sources: &[usize]) -> Vec<u32> {
    let mut dist = vec![u32::MAX; graph.node_count()];
    let mut queue = std::collections::VecDeque::new();
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in graph.successors(u) {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}
