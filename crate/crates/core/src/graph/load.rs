use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Graph, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Skip the first data line if it does not parse as an edge.
    #[default]
    Auto,
    /// Every non-comment line must be an edge.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicate_edges: usize,
    pub self_loops: usize,
    pub header_skipped: bool,
    /// True when every line carried an explicit probability.
    pub explicit_probabilities: bool,
    /// True when input labels were not already `0..n`.
    pub relabeled: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub report: LoadReport,
    /// Original label of each compact node id.
    pub labels: Vec<u64>,
}

/// Parses a SNAP-style edge list: `u v` or `u v p` per line, `#` comments.
///
/// Labels are compacted to `0..n` in ascending label order. Duplicate edges
/// keep the first probability; self-loops are dropped. Lines without an
/// explicit probability get a placeholder of 1.0 (see
/// [`Graph::assign_degree_probabilities`]).
pub fn load_edge_list<R: BufRead>(source: R, header_mode: HeaderMode) -> Result<LoadedGraph> {
    let mut report = LoadReport::default();
    let mut raw: Vec<(u64, u64, Option<f64>)> = Vec::new();
    let mut seen_data = false;
    let mut with_prob: Option<bool> = None;

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let first_data = !seen_data;
        seen_data = true;
        let parsed = match parse_line(trimmed) {
            Ok(p) => p,
            Err(message) => {
                if first_data && header_mode == HeaderMode::Auto {
                    report.header_skipped = true;
                    continue;
                }
                return Err(Error::Parse { line: line_no, message });
            }
        };
        match with_prob {
            None => with_prob = Some(parsed.2.is_some()),
            Some(flag) if flag != parsed.2.is_some() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "mixed lines with and without probabilities".into(),
                })
            }
            _ => {}
        }
        if parsed.0 == parsed.1 {
            report.self_loops += 1;
            continue;
        }
        raw.push(parsed);
    }

    if raw.is_empty() {
        return Err(Error::InvalidInput("edge list contains no edges".into()));
    }
    report.explicit_probabilities = with_prob.unwrap_or(false);

    let mut labels: Vec<u64> = raw.iter().flat_map(|e| [e.0, e.1]).collect();
    labels.sort_unstable();
    labels.dedup();
    report.relabeled = labels.iter().enumerate().any(|(i, &l)| i as u64 != l);
    let index: HashMap<u64, NodeId> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();

    let mut seen: HashMap<(NodeId, NodeId), ()> = HashMap::with_capacity(raw.len());
    let mut edges = Vec::with_capacity(raw.len());
    for (u, v, p) in raw {
        let (u, v) = (index[&u], index[&v]);
        if seen.insert((u, v), ()).is_some() {
            report.duplicate_edges += 1;
            continue;
        }
        edges.push((u, v, p.unwrap_or(1.0)));
    }
    if report.duplicate_edges > 0 || report.self_loops > 0 {
        log::warn!(
            "edge list: dropped {} duplicate edges and {} self-loops",
            report.duplicate_edges,
            report.self_loops
        );
    }

    let graph = Graph::from_edges(labels.len(), edges)?;
    Ok(LoadedGraph {
        graph,
        report,
        labels,
    })
}

pub fn load_edge_list_path<P: AsRef<Path>>(path: P, header_mode: HeaderMode) -> Result<LoadedGraph> {
    let file = File::open(path)?;
    load_edge_list(BufReader::new(file), header_mode)
}

fn parse_line(line: &str) -> std::result::Result<(u64, u64, Option<f64>), String> {
    let mut fields = line.split_whitespace();
    let mut node = |name: &str| -> std::result::Result<u64, String> {
        let f = fields.next().ok_or_else(|| format!("missing {name} node"))?;
        f.parse::<u64>().map_err(|_| format!("invalid {name} node `{f}`"))
    };
    let u = node("source")?;
    let v = node("target")?;
    let p = match fields.next() {
        None => None,
        Some(f) => {
            let p: f64 = f.parse().map_err(|_| format!("invalid probability `{f}`"))?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(format!("probability {p} outside (0, 1]"));
            }
            Some(p)
        }
    };
    if let Some(extra) = fields.next() {
        return Err(format!("unexpected field `{extra}`"));
    }
    Ok((u, v, p))
}
