use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use nie_core::graph::{load_edge_list_path, load_stats, save_stats, HeaderMode};
use nie_core::io::atomic_write;
use nie_core::{compute_node_stats, ClosenessMode, Graph, NodeId, NodeStats};

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Edge list: `u v` or `u v p` per line, `#` comments allowed
    #[arg(long)]
    pub graph: PathBuf,
    /// Use this probability on every edge instead of the file's or 1/in-degree
    #[arg(long)]
    pub uniform_probability: Option<f64>,
}

impl GraphArgs {
    /// Loads the graph; without explicit probabilities every edge into `v`
    /// gets `1 / in_degree(v)`.
    pub fn load(&self) -> Result<Graph> {
        let loaded = load_edge_list_path(&self.graph, HeaderMode::Auto)
            .with_context(|| format!("reading graph {}", self.graph.display()))?;
        let r = &loaded.report;
        log::info!(
            "graph {}: {} nodes, {} edges ({} duplicates, {} self-loops dropped)",
            self.graph.display(),
            loaded.graph.node_count(),
            loaded.graph.edge_count(),
            r.duplicate_edges,
            r.self_loops
        );
        if r.relabeled {
            log::warn!("node labels were not 0..n-1; ids are compacted in ascending label order");
        }
        let graph = match self.uniform_probability {
            Some(p) => loaded.graph.with_uniform_probability(p)?,
            None if r.explicit_probabilities => loaded.graph,
            None => loaded.graph.assign_degree_probabilities(),
        };
        Ok(graph)
    }
}

/// Loads the stats cache at `path` when it matches `graph`; otherwise
/// computes stats and (re)writes the cache. Returns the stats and the
/// seconds spent computing them (0 on a cache hit).
pub fn load_or_build_stats(
    graph: &Graph,
    path: Option<&Path>,
    mode: ClosenessMode,
) -> Result<(NodeStats, f64)> {
    if let Some(path) = path {
        if path.exists() {
            match load_stats(path, graph) {
                Ok(stats) => {
                    log::info!("stats cache {} matches the graph", path.display());
                    return Ok((stats, 0.0));
                }
                Err(e) => log::warn!("stats cache {} unusable ({e}); regenerating", path.display()),
            }
        }
    }
    let start = Instant::now();
    let stats = compute_node_stats(graph, mode)?;
    let seconds = start.elapsed().as_secs_f64();
    log::info!("node stats computed in {seconds:.3} s");
    if let Some(path) = path {
        save_stats(&stats, graph, mode, path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok((stats, seconds))
}

/// Comma/whitespace separated node ids, or `@path` to read them from a file.
pub fn parse_seed_set(spec: &str, graph: &Graph) -> Result<Vec<NodeId>> {
    let text = match spec.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading seed file {path}"))?,
        None => spec.to_string(),
    };
    let mut ids = Vec::new();
    for token in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let id: NodeId = token.parse().with_context(|| format!("bad node id {token:?}"))?;
        if id >= graph.node_count() {
            bail!("node {id} out of range (graph has {} nodes)", graph.node_count());
        }
        ids.push(id);
    }
    ids.sort_unstable();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        log::warn!("duplicate ids removed from seed set {spec:?}");
    }
    Ok(ids)
}

/// Writes `bytes` atomically to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => atomic_write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn json_line<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
