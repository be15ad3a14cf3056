mod common;

use common::{arb_graph, distances};
use nie_core::graph::{load_edge_list, multi_source_bfs, HeaderMode};
use nie_core::{compute_node_stats, ClosenessMode, Graph};
use proptest::prelude::*;

proptest! {
    #[test]
    fn reverse_adjacency_mirrors_forward(g in arb_graph(20, 60)) {
        let mut forward: Vec<_> = g.edges().map(|(u, v, p)| (u, v, p.to_bits())).collect();
        let mut backward = Vec::new();
        for v in 0..g.node_count() {
            for (&u, &p) in g.predecessors(v).iter().zip(g.incoming_probabilities(v)) {
                backward.push((u, v, p.to_bits()));
            }
        }
        forward.sort_unstable();
        backward.sort_unstable();
        prop_assert_eq!(forward, backward);
        let out_total: usize = (0..g.node_count()).map(|v| g.out_degree(v)).sum();
        prop_assert_eq!(out_total, g.edge_count());
    }

    #[test]
    fn fingerprint_ignores_edge_order(g in arb_graph(15, 40), salt in any::<u64>()) {
        let mut edges: Vec<_> = g.edges().collect();
        edges.sort_by_key(|&(u, v, _)| nie_core::seed::mix64(salt ^ (u * 1000 + v) as u64));
        let shuffled = Graph::from_edges(g.node_count(), edges).unwrap();
        prop_assert_eq!(shuffled.fingerprint(), g.fingerprint());
    }

    #[test]
    fn bfs_matches_reference(g in arb_graph(25, 70), limit in 0u32..6, src in any::<prop::sample::Index>()) {
        let s = src.index(g.node_count());
        let got = multi_source_bfs(&g, &[s], limit).unwrap();
        let full = distances(&g, &[s]);
        for v in 0..g.node_count() {
            let expected = (full[v] <= limit).then_some(full[v]);
            prop_assert_eq!(got.get(&v).copied(), expected);
        }
        // every reached non-source node has a parent one step closer
        for (&v, &d) in &got {
            if d > 0 {
                prop_assert!(g.predecessors(v).iter().any(|u| got.get(u) == Some(&(d - 1))));
            }
        }
    }

    #[test]
    fn stats_are_invariant_under_relabeling(g in arb_graph(15, 45), salt in any::<u64>()) {
        let n = g.node_count();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&v| nie_core::seed::mix64(salt ^ v as u64));
        let relabeled = Graph::from_edges(n, g.edges().map(|(u, v, p)| (perm[u], perm[v], p))).unwrap();
        let a = compute_node_stats(&g, ClosenessMode::Exact).unwrap();
        let b = compute_node_stats(&relabeled, ClosenessMode::Exact).unwrap();
        for v in 0..n {
            prop_assert!((a.clustering[v] - b.clustering[perm[v]]).abs() < 1e-12);
            prop_assert!((a.closeness[v] - b.closeness[perm[v]]).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.clustering[v]));
        }
    }

    #[test]
    fn sampling_every_node_reproduces_exact_closeness(g in arb_graph(20, 60), seed in any::<u64>()) {
        let exact = compute_node_stats(&g, ClosenessMode::Exact).unwrap();
        let sampled = compute_node_stats(&g, ClosenessMode::Sampled { k: g.node_count(), seed }).unwrap();
        prop_assert_eq!(exact, sampled);
    }

    #[test]
    fn loader_round_trips_written_edges(g in arb_graph(12, 30)) {
        let mut text = String::new();
        for (u, v, p) in g.edges() {
            text.push_str(&format!("{} {} {}\n", u + 100, v + 100, p));
        }
        prop_assume!(g.edge_count() > 0);
        let loaded = load_edge_list(text.as_bytes(), HeaderMode::None).unwrap();
        prop_assert_eq!(loaded.graph.edge_count(), g.edge_count());
        prop_assert!(loaded.labels.windows(2).all(|w| w[0] < w[1]));
        for (u, v, p) in loaded.graph.edges() {
            let (lu, lv) = (loaded.labels[u] as usize - 100, loaded.labels[v] as usize - 100);
            prop_assert_eq!(g.edge_probability(lu, lv), Some(p));
        }
    }
}

#[test]
fn degree_probabilities_sum_to_one_per_target() {
    let g = nie_core::synth::power_law_digraph(300, 900, 4).unwrap().assign_degree_probabilities();
    for v in 0..g.node_count() {
        let total: f64 = g.incoming_probabilities(v).iter().sum();
        if g.in_degree(v) > 0 {
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
