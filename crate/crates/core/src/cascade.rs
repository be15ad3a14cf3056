//! Two-cascade independent cascade diffusion with false-information priority.
//!
//! A realization ("world") is a function from edge index to a coin flip.
//! [`HashedWorld`] computes each coin from a counter-based hash of
//! `(world key, edge index)`, so two simulations that share a world see the
//! same live edges no matter which seeds they start from. That makes the
//! common-random-numbers difference in [`estimate_blocked`] a per-world
//! comparison rather than a comparison of two unrelated streams.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::seed::{child_seed, uniform_at};

pub const DEFAULT_EXACT_MAX_EDGES: usize = 20;
pub const DEFAULT_LABEL_REPLICATIONS: usize = 1_000;
pub const DEFAULT_EVAL_REPLICATIONS: usize = 10_000;

/// A false/true seed pair. Both lists are sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    s_f: Vec<NodeId>,
    s_t: Vec<NodeId>,
}

impl Instance {
    pub fn new(graph: &Graph, s_f: &[NodeId], s_t: &[NodeId]) -> Result<Self> {
        Self::for_node_count(graph.node_count(), s_f, s_t)
    }

    pub fn for_node_count(node_count: usize, s_f: &[NodeId], s_t: &[NodeId]) -> Result<Self> {
        let normalize = |s: &[NodeId]| -> Result<Vec<NodeId>> {
            let mut v = s.to_vec();
            v.sort_unstable();
            v.dedup();
            if let Some(&node) = v.iter().find(|&&x| x >= node_count) {
                return Err(Error::InvalidNode { node, node_count });
            }
            Ok(v)
        };
        let s_f = normalize(s_f)?;
        let s_t = normalize(s_t)?;
        if s_f.is_empty() {
            return Err(Error::InvalidInput("false seed set must be nonempty".into()));
        }
        if let Some(&v) = s_t.iter().find(|v| s_f.binary_search(v).is_ok()) {
            return Err(Error::InvalidInput(format!(
                "node {v} is in both the false and the true seed set"
            )));
        }
        Ok(Instance { s_f, s_t })
    }

    pub fn s_f(&self) -> &[NodeId] {
        &self.s_f
    }

    pub fn s_t(&self) -> &[NodeId] {
        &self.s_t
    }

    /// Same false seeds with no true seeds.
    pub fn without_true_seeds(&self) -> Instance {
        Instance {
            s_f: self.s_f.clone(),
            s_t: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeState {
    Theta,
    F,
    T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub f_active_count: usize,
    /// Nodes that end T-active or inactive.
    pub not_f_count: usize,
    pub node_states: Vec<NodeState>,
}

/// Source of per-edge coin flips for one realization.
pub trait EdgeCoins {
    fn is_live(&self, edge: usize, probability: f64) -> bool;
}

/// A world whose coins are hashed from a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedWorld {
    key: u64,
}

impl HashedWorld {
    pub fn new(key: u64) -> Self {
        HashedWorld { key }
    }

    /// The world used by replication `index` of an estimate seeded `master_seed`.
    pub fn replication(master_seed: u64, index: u64) -> Self {
        HashedWorld {
            key: child_seed(master_seed, index),
        }
    }

    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R) -> Self {
        HashedWorld { key: rng.random() }
    }
}

impl EdgeCoins for HashedWorld {
    #[inline]
    fn is_live(&self, edge: usize, probability: f64) -> bool {
        probability >= 1.0 || uniform_at(self.key, edge as u64) < probability
    }
}

/// A world given explicitly as a bit mask over edge indices (`m <= 64`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiveEdgeMask(pub u64);

impl EdgeCoins for LiveEdgeMask {
    #[inline]
    fn is_live(&self, edge: usize, _probability: f64) -> bool {
        self.0 >> edge & 1 == 1
    }
}

const THETA: u8 = 0;
const F_ACTIVE: u8 = 1;
const T_ACTIVE: u8 = 2;

/// Reusable simulation buffers.
#[derive(Debug, Clone)]
pub struct Simulator {
    state: Vec<u8>,
    touched: Vec<NodeId>,
    frontier_f: Vec<NodeId>,
    frontier_t: Vec<NodeId>,
    next_f: Vec<NodeId>,
    next_t: Vec<NodeId>,
}

impl Simulator {
    pub fn new(node_count: usize) -> Self {
        Simulator {
            state: vec![THETA; node_count],
            touched: Vec::new(),
            frontier_f: Vec::new(),
            frontier_t: Vec::new(),
            next_f: Vec::new(),
            next_t: Vec::new(),
        }
    }

    fn reset(&mut self, node_count: usize) {
        if self.state.len() < node_count {
            self.state.resize(node_count, THETA);
        }
        for &v in &self.touched {
            self.state[v] = THETA;
        }
        self.touched.clear();
    }

    /// Runs one realization and returns the number of F-active nodes.
    ///
    /// Rounds are synchronous: nodes activated in round `t` make their single
    /// attempts in round `t + 1`. All F attempts of a round are resolved
    /// before any T attempt, so a node reached by both cascades in the same
    /// round becomes F.
    pub fn run<C: EdgeCoins>(
        &mut self,
        graph: &Graph,
        s_f: &[NodeId],
        s_t: &[NodeId],
        coins: &C,
    ) -> usize {
        self.reset(graph.node_count());
        self.frontier_f.clear();
        self.frontier_t.clear();
        for &v in s_f {
            self.state[v] = F_ACTIVE;
            self.touched.push(v);
            self.frontier_f.push(v);
        }
        for &v in s_t {
            self.state[v] = T_ACTIVE;
            self.touched.push(v);
            self.frontier_t.push(v);
        }
        let mut f_count = s_f.len();

        while !self.frontier_f.is_empty() || !self.frontier_t.is_empty() {
            self.next_f.clear();
            self.next_t.clear();
            for &u in &self.frontier_f {
                for (e, v, p) in graph.out_edges(u) {
                    if self.state[v] == THETA && coins.is_live(e, p) {
                        self.state[v] = F_ACTIVE;
                        self.touched.push(v);
                        self.next_f.push(v);
                    }
                }
            }
            for &u in &self.frontier_t {
                for (e, v, p) in graph.out_edges(u) {
                    if self.state[v] == THETA && coins.is_live(e, p) {
                        self.state[v] = T_ACTIVE;
                        self.touched.push(v);
                        self.next_t.push(v);
                    }
                }
            }
            f_count += self.next_f.len();
            std::mem::swap(&mut self.frontier_f, &mut self.next_f);
            std::mem::swap(&mut self.frontier_t, &mut self.next_t);
        }
        f_count
    }

    pub fn state(&self, v: NodeId) -> NodeState {
        match self.state[v] {
            F_ACTIVE => NodeState::F,
            T_ACTIVE => NodeState::T,
            _ => NodeState::Theta,
        }
    }
}

/// Runs one realization of the two-cascade process.
pub fn simulate_once<C: EdgeCoins>(graph: &Graph, instance: &Instance, coins: &C) -> SimOutcome {
    let n = graph.node_count();
    let mut sim = Simulator::new(n);
    let f = sim.run(graph, instance.s_f(), instance.s_t(), coins);
    SimOutcome {
        f_active_count: f,
        not_f_count: n - f,
        node_states: (0..n).map(|v| sim.state(v)).collect(),
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replications)`; 0 when r = 1.
    pub std_error: f64,
    pub replications: usize,
    pub master_seed: u64,
}

impl Estimate {
    /// From integer per-replication samples; exact integer accumulation makes
    /// the result independent of summation order.
    fn from_sums(sum: i128, sum_sq: i128, r: usize, master_seed: u64) -> Self {
        let rr = r as i128;
        let mean = sum as f64 / r as f64;
        let std_error = if r > 1 {
            let numer = rr * sum_sq - sum * sum;
            let var = numer as f64 / (rr * (rr - 1)) as f64;
            (var.max(0.0) / r as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error,
            replications: r,
            master_seed,
        }
    }
}

fn check_replications(r: usize) -> Result<()> {
    if r == 0 {
        Err(Error::InvalidParameter("replications must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn accumulate<F>(graph: &Graph, r: usize, sample: F) -> (i128, i128)
where
    F: Fn(&mut Simulator, u64) -> i64 + Sync,
{
    let n = graph.node_count();
    (0..r as u64)
        .into_par_iter()
        .map_init(
            || Simulator::new(n),
            |sim, i| {
                let y = sample(sim, i) as i128;
                (y, y * y)
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Estimates `y(S_t | S_f)`, the expected number of nodes that do not end
/// F-active. Replication `i` uses [`HashedWorld::replication`]`(master_seed, i)`.
pub fn estimate_y(graph: &Graph, instance: &Instance, r: usize, master_seed: u64) -> Result<Estimate> {
    check_replications(r)?;
    let n = graph.node_count() as i64;
    let (sum, sum_sq) = accumulate(graph, r, |sim, i| {
        let world = HashedWorld::replication(master_seed, i);
        n - sim.run(graph, instance.s_f(), instance.s_t(), &world) as i64
    });
    Ok(Estimate::from_sums(sum, sum_sq, r, master_seed))
}

/// Estimates blocked influence `y(S_t | S_f) - y(∅ | S_f)` with both terms
/// of replication `i` evaluated in the same world.
pub fn estimate_blocked(
    graph: &Graph,
    instance: &Instance,
    r: usize,
    master_seed: u64,
) -> Result<Estimate> {
    check_replications(r)?;
    if instance.s_t().is_empty() {
        return Ok(Estimate::from_sums(0, 0, r, master_seed));
    }
    let (sum, sum_sq) = accumulate(graph, r, |sim, i| {
        let world = HashedWorld::replication(master_seed, i);
        let baseline = sim.run(graph, instance.s_f(), &[], &world) as i64;
        let blocked = sim.run(graph, instance.s_f(), instance.s_t(), &world) as i64;
        baseline - blocked
    });
    Ok(Estimate::from_sums(sum, sum_sq, r, master_seed))
}

/// Exact blocked influence by enumerating all `2^m` live-edge worlds.
pub fn exact_blocked(graph: &Graph, instance: &Instance, max_edges: usize) -> Result<f64> {
    let m = graph.edge_count();
    if m > max_edges || m > 40 {
        return Err(Error::TooLarge {
            edges: m,
            limit: max_edges.min(40),
        });
    }
    if instance.s_t().is_empty() {
        return Ok(0.0);
    }
    let probs: Vec<f64> = graph.edges().map(|e| e.2).collect();
    let mut sim = Simulator::new(graph.node_count());
    let mut total = 0.0;
    for mask in 0..(1u64 << m) {
        let weight = probs
            .iter()
            .enumerate()
            .map(|(e, &p)| if mask >> e & 1 == 1 { p } else { 1.0 - p })
            .product::<f64>();
        if weight == 0.0 {
            continue;
        }
        let world = LiveEdgeMask(mask);
        let baseline = sim.run(graph, instance.s_f(), &[], &world);
        let blocked = sim.run(graph, instance.s_f(), instance.s_t(), &world);
        total += weight * (baseline - blocked) as f64;
    }
    Ok(total)
}
