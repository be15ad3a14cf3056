use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BfsScratch, Direction, Graph, NodeId};
use crate::error::{Error, Result};
use crate::io::atomic_write;

/// Node count above which [`ClosenessMode::auto`] switches to sampling.
pub const DEFAULT_SAMPLED_THRESHOLD: usize = 50_000;
pub const DEFAULT_SAMPLED_SOURCES: usize = 2_048;

const STATS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosenessMode {
    Exact,
    /// Estimate from `k` distinct random targets, each resolved with one
    /// reverse BFS.
    Sampled { k: usize, seed: u64 },
}

impl ClosenessMode {
    pub fn auto(node_count: usize, seed: u64) -> Self {
        if node_count > DEFAULT_SAMPLED_THRESHOLD {
            ClosenessMode::Sampled {
                k: DEFAULT_SAMPLED_SOURCES,
                seed,
            }
        } else {
            ClosenessMode::Exact
        }
    }
}

/// Per-node statistics used by the topological features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    /// Forward closeness: reachable count over summed hop distance.
    pub closeness: Vec<f64>,
    /// Directed clustering coefficient.
    pub clustering: Vec<f64>,
    pub in_degree: Vec<u32>,
    pub out_degree: Vec<u32>,
}

impl NodeStats {
    pub fn node_count(&self) -> usize {
        self.closeness.len()
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                node,
                node_count: self.node_count(),
            })
        }
    }
}

pub fn compute_node_stats(graph: &Graph, closeness_mode: ClosenessMode) -> Result<NodeStats> {
    let closeness = match closeness_mode {
        ClosenessMode::Exact => exact_closeness(graph),
        ClosenessMode::Sampled { k, seed } => {
            if k == 0 {
                return Err(Error::InvalidParameter(
                    "sampled closeness needs k >= 1 sources".into(),
                ));
            }
            sampled_closeness(graph, k, seed)
        }
    };
    let n = graph.node_count();
    Ok(NodeStats {
        closeness,
        clustering: clustering_coefficients(graph),
        in_degree: (0..n).map(|v| graph.in_degree(v) as u32).collect(),
        out_degree: (0..n).map(|v| graph.out_degree(v) as u32).collect(),
    })
}

fn ratio(reached: u64, distance_sum: u64) -> f64 {
    if reached == 0 {
        0.0
    } else {
        reached as f64 / distance_sum as f64
    }
}

fn exact_closeness(graph: &Graph) -> Vec<f64> {
    let n = graph.node_count();
    (0..n)
        .into_par_iter()
        .map_init(
            || BfsScratch::new(n),
            |scratch, s| {
                let visited = scratch.run(graph, &[s], u32::MAX, Direction::Forward);
                let reached = visited.len() as u64 - 1;
                let sum: u64 = visited.iter().map(|&(_, d)| d as u64).sum();
                ratio(reached, sum)
            },
        )
        .collect()
}

/// Each sampled target `t` contributes `d(i, t)` to every node `i` that
/// reaches it. Counts and sums are integers, so the result does not depend on
/// scheduling, and with all `n` targets it equals the exact computation.
fn sampled_closeness(graph: &Graph, k: usize, seed: u64) -> Vec<f64> {
    let n = graph.node_count();
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = rand::seq::index::sample(&mut rng, n, k).into_vec();
    targets.sort_unstable();

    let zero = || (vec![0u64; n], vec![0u64; n]);
    let (reached, sums) = targets
        .par_iter()
        .fold(
            || (zero(), BfsScratch::new(n)),
            |((mut reached, mut sums), mut scratch), &t| {
                for &(i, d) in scratch.run(graph, &[t], u32::MAX, Direction::Reverse) {
                    if d > 0 {
                        reached[i] += 1;
                        sums[i] += d as u64;
                    }
                }
                ((reached, sums), scratch)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(zero, |(mut ra, mut sa), (rb, sb)| {
            ra.iter_mut().zip(rb).for_each(|(a, b)| *a += b);
            sa.iter_mut().zip(sb).for_each(|(a, b)| *a += b);
            (ra, sa)
        });
    reached.into_iter().zip(sums).map(|(r, s)| ratio(r, s)).collect()
}

/// `c_i = T / (2 dt (dt - 1) - 2 d<->)` with `T` half the number of closed
/// length-3 walks through `i` in `A + A^T`.
fn clustering_coefficients(graph: &Graph) -> Vec<f64> {
    let n = graph.node_count();
    let sym: Vec<Vec<(NodeId, u32)>> = (0..n).map(|i| symmetric_neighbors(graph, i)).collect();
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![0u32; n],
            |weight_to_i, i| {
                let total_degree = (graph.in_degree(i) + graph.out_degree(i)) as i64;
                let reciprocal = sym[i].iter().filter(|&&(_, w)| w == 2).count() as i64;
                let denom = 2 * total_degree * (total_degree - 1) - 2 * reciprocal;
                if total_degree <= 1 || denom <= 0 {
                    return 0.0;
                }
                for &(k, w) in &sym[i] {
                    weight_to_i[k] = w;
                }
                let mut walks: u64 = 0;
                for &(j, w_ij) in &sym[i] {
                    for &(k, w_jk) in &sym[j] {
                        walks += (w_ij * w_jk * weight_to_i[k]) as u64;
                    }
                }
                for &(k, _) in &sym[i] {
                    weight_to_i[k] = 0;
                }
                (walks as f64 / 2.0) / denom as f64
            },
        )
        .collect()
}

/// Merge of the sorted out- and in-lists with weights in {1, 2}.
fn symmetric_neighbors(graph: &Graph, i: NodeId) -> Vec<(NodeId, u32)> {
    let (out, inc) = (graph.successors(i), graph.predecessors(i));
    let mut merged = Vec::with_capacity(out.len() + inc.len());
    let (mut a, mut b) = (0, 0);
    while a < out.len() || b < inc.len() {
        match (out.get(a), inc.get(b)) {
            (Some(&x), Some(&y)) if x == y => {
                merged.push((x, 2));
                a += 1;
                b += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                merged.push((x, 1));
                a += 1;
            }
            (Some(&x), None) => {
                merged.push((x, 1));
                a += 1;
            }
            (_, Some(&y)) => {
                merged.push((y, 1));
                b += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    merged
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    format_version: u32,
    graph_fingerprint: String,
    closeness_mode: ClosenessMode,
    #[serde(flatten)]
    stats: NodeStats,
}

/// Writes the stats sidecar atomically.
pub fn save_stats(
    stats: &NodeStats,
    graph: &Graph,
    closeness_mode: ClosenessMode,
    path: &Path,
) -> Result<()> {
    let file = StatsFile {
        format_version: STATS_FORMAT_VERSION,
        graph_fingerprint: graph.fingerprint().to_string(),
        closeness_mode,
        stats: stats.clone(),
    };
    atomic_write(path, &serde_json::to_vec(&file)?)
}

/// Loads a stats sidecar, refusing files built for a different graph.
pub fn load_stats(path: &Path, graph: &Graph) -> Result<NodeStats> {
    let bytes = fs::read(path)?;
    let file: StatsFile = serde_json::from_slice(&bytes)?;
    if file.format_version != STATS_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: STATS_FORMAT_VERSION,
            found: file.format_version,
        });
    }
    if file.graph_fingerprint != graph.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: file.graph_fingerprint,
            found: graph.fingerprint().to_string(),
        });
    }
    let n = graph.node_count();
    let s = &file.stats;
    if [s.closeness.len(), s.clustering.len(), s.in_degree.len(), s.out_degree.len()]
        .iter()
        .any(|&len| len != n)
    {
        return Err(Error::InvalidInput("stats file length does not match graph".into()));
    }
    Ok(file.stats)
}
