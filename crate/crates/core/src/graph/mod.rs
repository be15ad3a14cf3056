//! Directed graphs with per-edge propagation probabilities.
//!
//! Adjacency is stored in compressed sparse row form in both directions.
//! Out-edges are sorted by `(source, target)`; the position of an edge in the
//! out-edge arrays is its canonical edge index, which the cascade simulator
//! uses to key per-edge coin flips.

mod bfs;
mod load;
mod stats;

pub use bfs::{multi_source_bfs, BfsScratch, Direction};
pub use load::{load_edge_list, load_edge_list_path, HeaderMode, LoadReport, LoadedGraph};
pub use stats::{
    compute_node_stats, load_stats, save_stats, ClosenessMode, NodeStats,
    DEFAULT_SAMPLED_SOURCES, DEFAULT_SAMPLED_THRESHOLD,
};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    out_probs: Vec<f64>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
    in_probs: Vec<f64>,
    /// Mean incoming edge probability per node (0 for nodes without parents).
    propagation_coefficient: Vec<f64>,
    fingerprint: String,
}

impl Graph {
    /// Builds a validated graph. Rejects self-loops, duplicate edges,
    /// out-of-range ids and probabilities outside `(0, 1]`.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        if node_count == 0 {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        let mut edges: Vec<(NodeId, NodeId, f64)> = edges.into_iter().collect();
        for &(u, v, p) in &edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::InvalidNode { node, node_count });
                }
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop on node {u}")));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "edge ({u},{v}) has probability {p} outside (0, 1]"
                )));
            }
        }
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = edges.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidInput(format!(
                "duplicate edge ({},{})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::from_sorted_unique(node_count, &edges))
    }

    fn from_sorted_unique(node_count: usize, edges: &[(NodeId, NodeId, f64)]) -> Self {
        let m = edges.len();
        let mut out_offsets = vec![0usize; node_count + 1];
        let mut in_offsets = vec![0usize; node_count + 1];
        for &(u, v, _) in edges {
            out_offsets[u + 1] += 1;
            in_offsets[v + 1] += 1;
        }
        for i in 0..node_count {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets = edges.iter().map(|e| e.1).collect();
        let out_probs = edges.iter().map(|e| e.2).collect();

        // edges are sorted by source, so each in-list ends up sorted by source
        let mut in_sources = vec![0; m];
        let mut in_probs = vec![0.0; m];
        let mut cursor = in_offsets.clone();
        for &(u, v, p) in edges {
            in_sources[cursor[v]] = u;
            in_probs[cursor[v]] = p;
            cursor[v] += 1;
        }

        let propagation_coefficient = (0..node_count)
            .map(|v| {
                let probs = &in_probs[in_offsets[v]..in_offsets[v + 1]];
                if probs.is_empty() {
                    0.0
                } else {
                    probs.iter().sum::<f64>() / probs.len() as f64
                }
            })
            .collect();

        let fingerprint = fingerprint_of(node_count, edges);
        Graph {
            node_count,
            out_offsets,
            out_targets,
            out_probs,
            in_offsets,
            in_sources,
            in_probs,
            propagation_coefficient,
            fingerprint,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn mean_degree(&self) -> f64 {
        self.edge_count() as f64 / self.node_count as f64
    }

    /// Hex SHA-256 over the node count and the canonical sorted edge list
    /// including probability bits.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn successors(&self, u: NodeId) -> &[NodeId] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    pub fn predecessors(&self, v: NodeId) -> &[NodeId] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// Probabilities of the edges into `v`, aligned with [`Graph::predecessors`].
    pub fn incoming_probabilities(&self, v: NodeId) -> &[f64] {
        &self.in_probs[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// Out-edges of `u` as `(edge_index, target, probability)`.
    pub fn out_edges(&self, u: NodeId) -> impl Iterator<Item = (usize, NodeId, f64)> + '_ {
        let range = self.out_offsets[u]..self.out_offsets[u + 1];
        range.map(move |e| (e, self.out_targets[e], self.out_probs[e]))
    }

    /// All edges as `(source, target, probability)` in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count).flat_map(move |u| self.out_edges(u).map(move |(_, v, p)| (u, v, p)))
    }

    pub fn edge_probability(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let targets = self.successors(u);
        targets
            .binary_search(&v)
            .ok()
            .map(|i| self.out_probs[self.out_offsets[u] + i])
    }

    pub fn propagation_coefficient(&self, v: NodeId) -> f64 {
        self.propagation_coefficient[v]
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.node_count {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                node,
                node_count: self.node_count,
            })
        }
    }

    pub fn check_nodes(&self, nodes: &[NodeId]) -> Result<()> {
        nodes.iter().try_for_each(|&v| self.check_node(v))
    }

    /// Same topology with every edge `(u, v)` weighted `1 / in_degree(v)`.
    pub fn assign_degree_probabilities(&self) -> Graph {
        let edges: Vec<_> = self
            .edges()
            .map(|(u, v, _)| (u, v, 1.0 / self.in_degree(v) as f64))
            .collect();
        Self::from_sorted_unique(self.node_count, &edges)
    }

    /// Same topology with every probability replaced by `p`.
    pub fn with_uniform_probability(&self, p: f64) -> Result<Graph> {
        Graph::from_edges(self.node_count, self.edges().map(|(u, v, _)| (u, v, p)))
    }
}

fn fingerprint_of(node_count: usize, edges: &[(NodeId, NodeId, f64)]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"nie-graph-v1");
    hasher.update((node_count as u64).to_le_bytes());
    for &(u, v, p) in edges {
        hasher.update((u as u64).to_le_bytes());
        hasher.update((v as u64).to_le_bytes());
        hasher.update(p.to_bits().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}
