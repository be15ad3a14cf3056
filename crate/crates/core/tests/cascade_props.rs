mod common;

use common::{arb_graph, random_graph, random_split, rng};
use nie_core::cascade::{EdgeCoins, LiveEdgeMask, Simulator};
use nie_core::{estimate_blocked, exact_blocked, simulate_once, HashedWorld, Instance, NodeState};
use proptest::prelude::*;
use rand::Rng;

fn f_count<C: EdgeCoins>(g: &nie_core::Graph, s_f: &[usize], s_t: &[usize], world: &C) -> usize {
    let mut sorted = s_t.to_vec();
    sorted.sort_unstable();
    Simulator::new(g.node_count()).run(g, s_f, &sorted, world)
}

proptest! {
    #[test]
    fn empty_true_seeds_block_nothing(g in arb_graph(20, 50), seed in any::<u64>(), r in 1usize..50) {
        let inst = Instance::new(&g, &[0], &[]).unwrap();
        let est = estimate_blocked(&g, &inst, r, seed).unwrap();
        prop_assert_eq!(est.mean, 0.0);
        prop_assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn adding_a_true_seed_never_helps_misinformation(
        g in arb_graph(30, 90),
        key in any::<u64>(),
        split_seed in any::<u64>(),
        v in any::<prop::sample::Index>(),
    ) {
        let (s_f, s_t) = random_split(g.node_count(), &mut rng(split_seed));
        let v = v.index(g.node_count());
        prop_assume!(!s_f.contains(&v) && !s_t.contains(&v));
        let world = HashedWorld::new(key);
        let mut larger = s_t.clone();
        larger.push(v);
        prop_assert!(f_count(&g, &s_f, &larger, &world) <= f_count(&g, &s_f, &s_t, &world));
    }

    #[test]
    fn simulation_outcome_is_consistent(g in arb_graph(25, 70), key in any::<u64>(), split_seed in any::<u64>()) {
        let (s_f, s_t) = random_split(g.node_count(), &mut rng(split_seed));
        let inst = Instance::new(&g, &s_f, &s_t).unwrap();
        let out = simulate_once(&g, &inst, &HashedWorld::new(key));
        let f = out.node_states.iter().filter(|&&s| s == NodeState::F).count();
        prop_assert_eq!(f, out.f_active_count);
        prop_assert_eq!(out.f_active_count + out.not_f_count, g.node_count());
        for &v in inst.s_t() {
            prop_assert_eq!(out.node_states[v], NodeState::T);
        }
        // an F node other than a seed has an F parent whose edge is live
        let world = HashedWorld::new(key);
        for v in 0..g.node_count() {
            if out.node_states[v] == NodeState::F && !inst.s_f().contains(&v) {
                let has_parent = g.edges().enumerate().any(|(e, (u, w, p))| {
                    w == v && out.node_states[u] == NodeState::F && world.is_live(e, p)
                });
                prop_assert!(has_parent);
            }
        }
    }
}

/// Exhaustive diminishing-returns check of the per-world blocked count on
/// small graphs: for A ⊆ B and v ∉ B, the gain of v at A is at least its
/// gain at B.
#[test]
fn per_world_blocked_count_is_submodular() {
    let mut r = rng(41);
    for _ in 0..60 {
        let n = r.random_range(2..=6);
        let g = random_graph(n, 8, &mut r);
        let s_f = vec![r.random_range(0..n)];
        let free: Vec<usize> = (0..n).filter(|v| !s_f.contains(v)).collect();
        let m = g.edge_count();
        for mask in 0..(1u64 << m) {
            let world = LiveEdgeMask(mask);
            let blocked = |set_bits: u32| {
                let s_t: Vec<usize> = free.iter().enumerate().filter(|(i, _)| set_bits >> i & 1 == 1).map(|(_, &v)| v).collect();
                f_count(&g, &s_f, &[], &world) as i64 - f_count(&g, &s_f, &s_t, &world) as i64
            };
            let subsets = 1u32 << free.len();
            let values: Vec<i64> = (0..subsets).map(blocked).collect();
            for b in 0..subsets {
                for a in (0..subsets).filter(|a| a & !b == 0) {
                    for i in (0..free.len()).filter(|i| b >> i & 1 == 0) {
                        let bit = 1 << i;
                        assert!(
                            values[(a | bit) as usize] - values[a as usize]
                                >= values[(b | bit) as usize] - values[b as usize]
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn exact_value_is_bounded_and_monotone() {
    let mut r = rng(7);
    for _ in 0..200 {
        let n = r.random_range(2..=8);
        let g = random_graph(n, 12, &mut r);
        let (s_f, s_t) = random_split(n, &mut r);
        let inst = Instance::new(&g, &s_f, &s_t).unwrap();
        let value = exact_blocked(&g, &inst, 20).unwrap();
        assert!(value >= -1e-12 && value <= (n - s_f.len()) as f64 + 1e-12);
        if let Some(&drop) = s_t.first() {
            let fewer: Vec<usize> = s_t.iter().copied().filter(|&v| v != drop).collect();
            let smaller = exact_blocked(&g, &Instance::new(&g, &s_f, &fewer).unwrap(), 20).unwrap();
            assert!(smaller <= value + 1e-12);
        }
    }
}

#[test]
fn estimate_is_independent_of_thread_count() {
    let g = nie_core::synth::power_law_digraph(200, 600, 3).unwrap().assign_degree_probabilities();
    let inst = Instance::new(&g, &[0, 1, 2], &[5, 9]).unwrap();
    let reference = estimate_blocked(&g, &inst, 3000, 99).unwrap();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let est = pool.install(|| estimate_blocked(&g, &inst, 3000, 99).unwrap());
        assert_eq!(est, reference);
    }
}
