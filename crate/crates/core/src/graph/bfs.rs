use std::collections::BTreeMap;

use super::{Graph, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Follow out-edges: distances from the sources.
    Forward,
    /// Follow in-edges: distances to the sources.
    Reverse,
}

/// Reusable buffers for truncated multi-source BFS.
///
/// Distances are stamped with an epoch counter so a run costs time
/// proportional to the visited region, not to the node count.
#[derive(Debug, Clone)]
pub struct BfsScratch {
    dist: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    visited: Vec<(NodeId, u32)>,
}

impl BfsScratch {
    pub fn new(node_count: usize) -> Self {
        BfsScratch {
            dist: vec![0; node_count],
            stamp: vec![0; node_count],
            epoch: 0,
            visited: Vec::new(),
        }
    }

    fn ensure(&mut self, node_count: usize) {
        if self.dist.len() < node_count {
            self.dist.resize(node_count, 0);
            self.stamp.resize(node_count, 0);
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Runs BFS from `sources` and returns every node within `limit` hops as
    /// `(node, distance)` in visitation order (non-decreasing distance).
    /// Ids are not validated here.
    pub fn run(
        &mut self,
        graph: &Graph,
        sources: &[NodeId],
        limit: u32,
        direction: Direction,
    ) -> &[(NodeId, u32)] {
        self.ensure(graph.node_count());
        self.next_epoch();
        self.visited.clear();
        for &s in sources {
            if self.stamp[s] != self.epoch {
                self.stamp[s] = self.epoch;
                self.dist[s] = 0;
                self.visited.push((s, 0));
            }
        }
        let mut head = 0;
        while head < self.visited.len() {
            let (u, d) = self.visited[head];
            head += 1;
            if d >= limit {
                continue;
            }
            let next = match direction {
                Direction::Forward => graph.successors(u),
                Direction::Reverse => graph.predecessors(u),
            };
            for &v in next {
                if self.stamp[v] != self.epoch {
                    self.stamp[v] = self.epoch;
                    self.dist[v] = d + 1;
                    self.visited.push((v, d + 1));
                }
            }
        }
        &self.visited
    }

    /// Distance found by the most recent run, if `v` was reached.
    #[inline]
    pub fn distance(&self, v: NodeId) -> Option<u32> {
        (self.stamp.get(v) == Some(&self.epoch)).then(|| self.dist[v])
    }

    pub fn visited(&self) -> &[(NodeId, u32)] {
        &self.visited
    }
}

/// Directed hop distance from the nearest source, for every node within
/// `depth_limit` hops. Sources map to 0.
pub fn multi_source_bfs(
    graph: &Graph,
    sources: &[NodeId],
    depth_limit: u32,
) -> Result<BTreeMap<NodeId, u32>> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter("BFS needs at least one source".into()));
    }
    graph.check_nodes(sources)?;
    let mut scratch = BfsScratch::new(graph.node_count());
    Ok(scratch
        .run(graph, sources, depth_limit, Direction::Forward)
        .iter()
        .copied()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn one_hop() {
        let d = multi_source_bfs(&path3(), &[0], 1).unwrap();
        assert_eq!(d, BTreeMap::from([(0, 0), (1, 1)]));
    }

    #[test]
    fn multi_source_minimum() {
        let d = multi_source_bfs(&path3(), &[0, 2], 2).unwrap();
        assert_eq!(d, BTreeMap::from([(0, 0), (1, 1), (2, 0)]));
    }

    #[test]
    fn diamond_layers() {
        let g = Graph::from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap();
        let d = multi_source_bfs(&g, &[0], 2).unwrap();
        assert_eq!(d, BTreeMap::from([(0, 0), (1, 1), (2, 1), (3, 2)]));
    }

    #[test]
    fn zero_depth_returns_sources() {
        let d = multi_source_bfs(&path3(), &[1], 0).unwrap();
        assert_eq!(d, BTreeMap::from([(1, 0)]));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            multi_source_bfs(&path3(), &[], 2),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            multi_source_bfs(&path3(), &[7], 2),
            Err(Error::InvalidNode { node: 7, .. })
        ));
    }

    #[test]
    fn reverse_direction() {
        let mut s = BfsScratch::new(3);
        let v: Vec<_> = s.run(&path3(), &[2], u32::MAX, Direction::Reverse).to_vec();
        assert_eq!(v, vec![(2, 0), (1, 1), (0, 2)]);
        // scratch reuse does not leak previous distances
        s.run(&path3(), &[0], 0, Direction::Forward);
        assert_eq!(s.distance(2), None);
        assert_eq!(s.distance(0), Some(0));
    }
}
