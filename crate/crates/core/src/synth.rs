//! Synthetic directed power-law graphs for tests, benchmarks and demos.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Preferential-attachment digraph with exactly `edge_count` edges.
///
/// Nodes arrive one at a time and connect to distinct earlier nodes chosen
/// with probability proportional to degree + 1. Each edge is oriented by a
/// fair coin, so both in- and out-degrees are heavy-tailed. Every edge
/// carries probability 1; use [`Graph::assign_degree_probabilities`] for
/// the usual weighting.
pub fn power_law_digraph(node_count: usize, edge_count: usize, seed: u64) -> Result<Graph> {
    if node_count < 2 {
        return Err(Error::InvalidParameter("need at least 2 nodes".into()));
    }
    let capacity = node_count * (node_count - 1) / 2;
    if edge_count == 0 || edge_count > capacity {
        return Err(Error::InvalidParameter(format!(
            "edge count must lie in 1..={capacity} for {node_count} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // one entry per node plus one per incident edge endpoint
    let mut urn: Vec<usize> = vec![0];
    let mut edges = Vec::with_capacity(edge_count);
    let mut remaining = edge_count;
    let mut chosen = Vec::new();

    for i in 1..node_count {
        let nodes_left = node_count - i;
        let take = remaining.div_ceil(nodes_left).min(i).min(remaining);
        chosen.clear();
        while chosen.len() < take {
            let j = if take * 2 > i {
                // dense regime: uniform over the remaining older nodes
                rng.random_range(0..i)
            } else {
                urn[rng.random_range(0..urn.len())]
            };
            if !chosen.contains(&j) {
                chosen.push(j);
            }
        }
        for &j in &chosen {
            if rng.random_bool(0.5) {
                edges.push((i, j, 1.0));
            } else {
                edges.push((j, i, 1.0));
            }
            urn.push(j);
            urn.push(i);
        }
        urn.push(i);
        remaining -= take;
    }
    if remaining > 0 {
        return Err(Error::InvalidParameter(format!(
            "could not place {remaining} of {edge_count} edges"
        )));
    }
    Graph::from_edges(node_count, edges)
}

/// Writes `u v p` lines readable by [`crate::graph::load_edge_list`].
pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W, with_probabilities: bool) -> Result<()> {
    writeln!(out, "# nodes {} edges {}", graph.node_count(), graph.edge_count())?;
    for (u, v, p) in graph.edges() {
        if with_probabilities {
            writeln!(out, "{u} {v} {p}")?;
        } else {
            writeln!(out, "{u} {v}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_edge_list, HeaderMode};

    #[test]
    fn desk_scale_counts() {
        let g = power_law_digraph(768, 1532, 1).unwrap();
        assert_eq!(g.node_count(), 768);
        assert_eq!(g.edge_count(), 1532);
        assert!((g.mean_degree() - 1.99).abs() < 0.01);
        let max_out = (0..768).map(|v| g.out_degree(v)).max().unwrap();
        assert!(max_out >= 15, "expected hubs, max out-degree {max_out}");
    }

    #[test]
    fn dense_counts() {
        let g = power_law_digraph(1005, 25_571, 2).unwrap();
        assert_eq!(g.edge_count(), 25_571);
    }

    #[test]
    fn deterministic_and_reloadable() {
        let a = power_law_digraph(100, 300, 9).unwrap();
        let b = power_law_digraph(100, 300, 9).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut buf = Vec::new();
        write_edge_list(&a, &mut buf, false).unwrap();
        let back = load_edge_list(buf.as_slice(), HeaderMode::None).unwrap();
        assert_eq!(back.graph.edge_count(), 300);
        // a node that never receives an edge would be dropped by the loader
        assert_eq!(back.graph.node_count(), 100);
    }

    #[test]
    fn rejects_impossible_sizes() {
        assert!(power_law_digraph(1, 0, 0).is_err());
        assert!(power_law_digraph(4, 7, 0).is_err());
    }
}
