//! The seven-dimensional feature vector fed to the surrogate.
//!
//! For a seed set `S` the topological features are the number of distinct
//! successors of `S` (`d`), the summed closeness of `S` (`b`) and the summed
//! clustering coefficient of `S` (`c`). The inter-relationship score `p`
//! weighs every node within `H` hops of the false seeds by an approximate
//! probability of it turning F-active, counting only the nodes that the true
//! seeds reach strictly earlier.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cascade::Instance;
use crate::error::{Error, Result};
use crate::graph::{BfsScratch, Direction, Graph, NodeId, NodeStats};

pub const FEATURE_DIM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub d_f: f64,
    pub b_f: f64,
    pub c_f: f64,
    pub d_t: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub p: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [self.d_f, self.b_f, self.c_f, self.d_t, self.b_t, self.c_t, self.p]
    }

    pub fn from_array(a: [f64; FEATURE_DIM]) -> Self {
        FeatureVector {
            d_f: a[0],
            b_f: a[1],
            c_f: a[2],
            d_t: a[3],
            b_t: a[4],
            c_t: a[5],
            p: a[6],
        }
    }
}

fn nonempty(s: &[NodeId]) -> Result<()> {
    if s.is_empty() {
        Err(Error::InvalidParameter("seed set must be nonempty".into()))
    } else {
        Ok(())
    }
}

fn check_radius(h: u32) -> Result<()> {
    if h == 0 {
        Err(Error::InvalidParameter("radius H must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Size of the union of the successor sets of `s`.
pub fn neighborhood_feature(graph: &Graph, s: &[NodeId]) -> Result<usize> {
    nonempty(s)?;
    graph.check_nodes(s)?;
    let union: HashSet<NodeId> = s.iter().flat_map(|&u| graph.successors(u).iter().copied()).collect();
    Ok(union.len())
}

pub fn location_feature(stats: &NodeStats, s: &[NodeId]) -> Result<f64> {
    s.iter().try_fold(0.0, |acc, &v| {
        stats.check_node(v)?;
        Ok(acc + stats.closeness[v])
    })
}

pub fn structure_feature(stats: &NodeStats, s: &[NodeId]) -> Result<f64> {
    s.iter().try_fold(0.0, |acc, &v| {
        stats.check_node(v)?;
        Ok(acc + stats.clustering[v])
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FActiveEntry {
    pub node: NodeId,
    /// Hop distance from the false seed set, in `1..=H`.
    pub distance: u32,
    pub probability: f64,
}

/// Approximate F-activation probabilities for the nodes within `H` hops of
/// the false seeds (the seeds themselves excluded).
#[derive(Debug, Clone)]
pub struct FActiveMap {
    pub h_radius: u32,
    /// Entries in BFS order, so distances are non-decreasing.
    pub entries: Vec<FActiveEntry>,
}

impl FActiveMap {
    pub fn probability(&self, node: NodeId) -> Option<f64> {
        self.entries.iter().find(|e| e.node == node).map(|e| e.probability)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }
}

/// Layer-by-layer approximation: a node at distance 1 gets its propagation
/// coefficient `pc` (mean incoming probability); a node at distance `h`
/// gets `pc * (1 - prod(1 - Pr[parent]))` over its parents at distances
/// `1..h`. Same-layer parents are not consulted.
pub fn f_active_probabilities(graph: &Graph, s_f: &[NodeId], h: u32) -> Result<FActiveMap> {
    check_radius(h)?;
    nonempty(s_f)?;
    graph.check_nodes(s_f)?;
    let mut scratch = BfsScratch::new(graph.node_count());
    Ok(f_active_with(graph, s_f, h, &mut scratch))
}

fn f_active_with(graph: &Graph, s_f: &[NodeId], h: u32, scratch: &mut BfsScratch) -> FActiveMap {
    scratch.run(graph, s_f, h, Direction::Forward);
    let mut prob_of: HashMap<NodeId, f64> = HashMap::with_capacity(scratch.visited().len());
    let mut entries = Vec::with_capacity(scratch.visited().len());
    for &(v, d) in scratch.visited() {
        if d == 0 {
            continue;
        }
        let pc = graph.propagation_coefficient(v);
        let probability = if d == 1 {
            pc
        } else {
            let none_active: f64 = graph
                .predecessors(v)
                .iter()
                .filter(|&&u| matches!(scratch.distance(u), Some(du) if du >= 1 && du < d))
                .map(|u| 1.0 - prob_of[u])
                .product();
            pc * (1.0 - none_active)
        };
        prob_of.insert(v, probability);
        entries.push(FActiveEntry {
            node: v,
            distance: d,
            probability,
        });
    }
    FActiveMap { h_radius: h, entries }
}

/// `p(S_f, S_t)`: summed F-activation probability of the nodes in `S_f^H`
/// that are strictly closer to `S_t` than to `S_f`.
pub fn inter_relationship(graph: &Graph, instance: &Instance, h: u32) -> Result<f64> {
    check_radius(h)?;
    let mut scratch = BfsScratch::new(graph.node_count());
    let map = f_active_with(graph, instance.s_f(), h, &mut scratch);
    Ok(judged_weight(graph, &map.entries, instance.s_t(), h, &mut scratch))
}

/// Distances from `S_t` only matter up to `H - 1`, since every node of
/// `S_f^H` is at most `H` hops from `S_f`.
fn judged_weight(
    graph: &Graph,
    entries: &[FActiveEntry],
    s_t: &[NodeId],
    h: u32,
    scratch: &mut BfsScratch,
) -> f64 {
    if s_t.is_empty() {
        return 0.0;
    }
    scratch.run(graph, s_t, h - 1, Direction::Forward);
    entries
        .iter()
        .filter(|e| matches!(scratch.distance(e.node), Some(dt) if dt < e.distance))
        .map(|e| e.probability)
        .sum()
}

/// Per-thread buffers for repeated feature extraction on one graph.
#[derive(Debug, Clone)]
pub struct FeatureScratch {
    bfs: BfsScratch,
    mark: Vec<u32>,
    epoch: u32,
}

impl FeatureScratch {
    pub fn new(node_count: usize) -> Self {
        FeatureScratch {
            bfs: BfsScratch::new(node_count),
            mark: vec![0; node_count],
            epoch: 0,
        }
    }

    fn union_size(&mut self, graph: &Graph, s: &[NodeId]) -> usize {
        if self.mark.len() < graph.node_count() {
            self.mark.resize(graph.node_count(), 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let mut count = 0;
        for &u in s {
            for &v in graph.successors(u) {
                if self.mark[v] != self.epoch {
                    self.mark[v] = self.epoch;
                    count += 1;
                }
            }
        }
        count
    }
}

/// Everything about a false seed set that does not depend on the true
/// seeds, computed once per problem.
#[derive(Debug, Clone)]
pub struct FalseSeedContext {
    h_radius: u32,
    s_f: Vec<NodeId>,
    d_f: f64,
    b_f: f64,
    c_f: f64,
    reach: Vec<FActiveEntry>,
}

impl FalseSeedContext {
    pub fn new(graph: &Graph, stats: &NodeStats, s_f: &[NodeId], h: u32) -> Result<Self> {
        let mut scratch = FeatureScratch::new(graph.node_count());
        Self::with_scratch(graph, stats, s_f, h, &mut scratch)
    }

    pub fn with_scratch(
        graph: &Graph,
        stats: &NodeStats,
        s_f: &[NodeId],
        h: u32,
        scratch: &mut FeatureScratch,
    ) -> Result<Self> {
        check_radius(h)?;
        nonempty(s_f)?;
        graph.check_nodes(s_f)?;
        if stats.node_count() != graph.node_count() {
            return Err(Error::InvalidInput("node stats do not match the graph".into()));
        }
        let mut s_f = s_f.to_vec();
        s_f.sort_unstable();
        s_f.dedup();
        let d_f = scratch.union_size(graph, &s_f) as f64;
        let b_f = location_feature(stats, &s_f)?;
        let c_f = structure_feature(stats, &s_f)?;
        let reach = f_active_with(graph, &s_f, h, &mut scratch.bfs).entries;
        Ok(FalseSeedContext {
            h_radius: h,
            s_f,
            d_f,
            b_f,
            c_f,
            reach,
        })
    }

    pub fn h_radius(&self) -> u32 {
        self.h_radius
    }

    pub fn s_f(&self) -> &[NodeId] {
        &self.s_f
    }

    /// Size of `S_f^H`.
    pub fn reach_len(&self) -> usize {
        self.reach.len()
    }

    /// Features for the true seed set `s_t`, which must be sorted, free of
    /// duplicates and disjoint from the false seeds.
    pub fn features(
        &self,
        graph: &Graph,
        stats: &NodeStats,
        s_t: &[NodeId],
        scratch: &mut FeatureScratch,
    ) -> Result<FeatureVector> {
        let mut fv = FeatureVector {
            d_f: self.d_f,
            b_f: self.b_f,
            c_f: self.c_f,
            ..FeatureVector::default()
        };
        if s_t.is_empty() {
            return Ok(fv);
        }
        graph.check_nodes(s_t)?;
        fv.d_t = scratch.union_size(graph, s_t) as f64;
        fv.b_t = location_feature(stats, s_t)?;
        fv.c_t = structure_feature(stats, s_t)?;
        fv.p = judged_weight(graph, &self.reach, s_t, self.h_radius, &mut scratch.bfs);
        Ok(fv)
    }
}

/// Assembles `(d_f, b_f, c_f, d_t, b_t, c_t, p)` for an instance.
pub fn featurize(graph: &Graph, stats: &NodeStats, instance: &Instance, h: u32) -> Result<FeatureVector> {
    let mut scratch = FeatureScratch::new(graph.node_count());
    let ctx = FalseSeedContext::with_scratch(graph, stats, instance.s_f(), h, &mut scratch)?;
    ctx.features(graph, stats, instance.s_t(), &mut scratch)
}
