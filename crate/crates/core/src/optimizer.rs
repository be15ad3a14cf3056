//! Greedy and lazy-greedy (CELF) true-seed selection over a pluggable
//! blocked-influence objective.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{estimate_blocked, exact_blocked, Estimate, Instance};
use crate::error::{Error, Result};
use crate::features::{FalseSeedContext, FeatureScratch};
use crate::graph::{Graph, NodeId, NodeStats};
use crate::model::MlpModel;
use crate::seed::set_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Nie,
    Mcs { replications: usize, seed: u64 },
    Exact,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Nie => "nie",
            EstimatorKind::Mcs { .. } => "mcs",
            EstimatorKind::Exact => "exact",
        }
    }
}

/// Blocked influence of a true seed set against fixed false seeds.
pub trait BlockingObjective: Sync {
    fn node_count(&self) -> usize;
    fn false_seeds(&self) -> &[NodeId];
    fn kind(&self) -> EstimatorKind;
    /// Score of `s_t`, which is sorted and disjoint from the false seeds.
    fn value(&self, s_t: &[NodeId]) -> Result<f64>;
}

/// Neural estimate: features of `(S_f, S_t)` fed through the MLP.
pub struct NieObjective<'a> {
    graph: &'a Graph,
    stats: &'a NodeStats,
    model: &'a MlpModel,
    context: FalseSeedContext,
    scratch: Mutex<Vec<FeatureScratch>>,
}

impl<'a> NieObjective<'a> {
    pub fn new(graph: &'a Graph, stats: &'a NodeStats, model: &'a MlpModel, s_f: &[NodeId]) -> Result<Self> {
        if model.graph_fingerprint != graph.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: model.graph_fingerprint.clone(),
                found: graph.fingerprint().to_string(),
            });
        }
        let context = FalseSeedContext::new(graph, stats, s_f, model.h_radius)?;
        Ok(NieObjective {
            graph,
            stats,
            model,
            context,
            scratch: Mutex::new(Vec::new()),
        })
    }
}

impl BlockingObjective for NieObjective<'_> {
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    fn false_seeds(&self) -> &[NodeId] {
        self.context.s_f()
    }

    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Nie
    }

    fn value(&self, s_t: &[NodeId]) -> Result<f64> {
        let pooled = self.scratch.lock().expect("scratch pool poisoned").pop();
        let mut scratch = pooled.unwrap_or_else(|| FeatureScratch::new(self.graph.node_count()));
        let features = self.context.features(self.graph, self.stats, s_t, &mut scratch);
        self.scratch.lock().expect("scratch pool poisoned").push(scratch);
        Ok(self.model.forward(&features?))
    }
}

/// How an MCS objective seeds each evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Each true seed set gets its own seed derived from the master seed
    /// and the set's members.
    PerSet,
    /// Every set is evaluated in the same worlds, which keeps the sample
    /// mean exactly submodular.
    Common,
}

/// Monte Carlo estimate of blocked influence.
pub struct McsObjective<'a> {
    graph: &'a Graph,
    s_f: Vec<NodeId>,
    replications: usize,
    master_seed: u64,
    policy: SeedPolicy,
}

impl<'a> McsObjective<'a> {
    pub fn new(graph: &'a Graph, s_f: &[NodeId], replications: usize, master_seed: u64) -> Result<Self> {
        Self::with_policy(graph, s_f, replications, master_seed, SeedPolicy::PerSet)
    }

    pub fn with_policy(
        graph: &'a Graph,
        s_f: &[NodeId],
        replications: usize,
        master_seed: u64,
        policy: SeedPolicy,
    ) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        let inst = Instance::new(graph, s_f, &[])?;
        Ok(McsObjective {
            graph,
            s_f: inst.s_f().to_vec(),
            replications,
            master_seed,
            policy,
        })
    }
}

impl BlockingObjective for McsObjective<'_> {
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    fn false_seeds(&self) -> &[NodeId] {
        &self.s_f
    }

    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Mcs {
            replications: self.replications,
            seed: self.master_seed,
        }
    }

    fn value(&self, s_t: &[NodeId]) -> Result<f64> {
        let seed = match self.policy {
            SeedPolicy::PerSet => set_seed(self.master_seed, s_t),
            SeedPolicy::Common => self.master_seed,
        };
        let inst = Instance::new(self.graph, &self.s_f, s_t)?;
        Ok(estimate_blocked(self.graph, &inst, self.replications, seed)?.mean)
    }
}

/// Exact blocked influence by live-edge enumeration (small graphs only).
pub struct ExactObjective<'a> {
    graph: &'a Graph,
    s_f: Vec<NodeId>,
    max_edges: usize,
}

impl<'a> ExactObjective<'a> {
    pub fn new(graph: &'a Graph, s_f: &[NodeId], max_edges: usize) -> Result<Self> {
        if graph.edge_count() > max_edges.min(40) {
            return Err(Error::TooLarge {
                edges: graph.edge_count(),
                limit: max_edges.min(40),
            });
        }
        let inst = Instance::new(graph, s_f, &[])?;
        Ok(ExactObjective {
            graph,
            s_f: inst.s_f().to_vec(),
            max_edges,
        })
    }
}

impl BlockingObjective for ExactObjective<'_> {
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    fn false_seeds(&self) -> &[NodeId] {
        &self.s_f
    }

    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Exact
    }

    fn value(&self, s_t: &[NodeId]) -> Result<f64> {
        let inst = Instance::new(self.graph, &self.s_f, s_t)?;
        exact_blocked(self.graph, &inst, self.max_edges)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// Checked before every estimator evaluation; a solve that hits it
    /// returns the picks made so far with `completed == false`.
    pub deadline: Option<Instant>,
}

impl SolveOptions {
    pub fn with_budget(budget: Duration) -> Self {
        SolveOptions {
            deadline: Some(Instant::now() + budget),
        }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CelfTrace {
    /// Picks in selection order.
    pub chosen: Vec<NodeId>,
    /// Objective value of the chosen prefix after each pick.
    pub scores: Vec<f64>,
    pub marginal_gains: Vec<f64>,
    /// Objective value of the empty set.
    pub base_value: f64,
    /// Estimator calls, including the one for the empty set.
    pub evaluations_used: usize,
    /// Time from the start of the solve to each pick.
    pub pick_times: Vec<Duration>,
    pub completed: bool,
}

impl CelfTrace {
    fn new(base_value: f64) -> Self {
        CelfTrace {
            chosen: Vec::new(),
            scores: Vec::new(),
            marginal_gains: Vec::new(),
            base_value,
            evaluations_used: 1,
            pick_times: Vec::new(),
            completed: false,
        }
    }

    /// The chosen set, sorted.
    pub fn solution(&self) -> Vec<NodeId> {
        sorted_prefix(&self.chosen, self.chosen.len())
    }

    /// Objective value of the full chosen set.
    pub fn final_score(&self) -> f64 {
        self.scores.last().copied().unwrap_or(self.base_value)
    }

    fn record(&mut self, v: NodeId, score: f64, start: Instant) {
        self.marginal_gains.push(score - self.final_score());
        self.chosen.push(v);
        self.scores.push(score);
        self.pick_times.push(start.elapsed());
    }
}

/// The first `len` picks of `chosen`, sorted.
pub fn sorted_prefix(chosen: &[NodeId], len: usize) -> Vec<NodeId> {
    let mut s = chosen[..len].to_vec();
    s.sort_unstable();
    s
}

fn with_node(sorted: &[NodeId], v: NodeId) -> Vec<NodeId> {
    let mut s = Vec::with_capacity(sorted.len() + 1);
    let at = sorted.partition_point(|&u| u < v);
    s.extend_from_slice(&sorted[..at]);
    s.push(v);
    s.extend_from_slice(&sorted[at..]);
    s
}

fn check_budget(objective: &dyn BlockingObjective, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be >= 1".into()));
    }
    let free = objective.node_count() - objective.false_seeds().len();
    if free < k {
        return Err(Error::InvalidParameter(format!(
            "K = {k} exceeds the {free} nodes outside the false seeds"
        )));
    }
    Ok(())
}

fn candidates(objective: &dyn BlockingObjective) -> Vec<NodeId> {
    let s_f = objective.false_seeds();
    (0..objective.node_count())
        .filter(|v| s_f.binary_search(v).is_err())
        .collect()
}

fn evaluate(objective: &dyn BlockingObjective, set: &[NodeId], candidate: NodeId) -> Result<f64> {
    let value = objective.value(set).map_err(|e| Error::Estimator {
        candidate,
        source: Box::new(e),
    })?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Estimator {
            candidate,
            source: Box::new(Error::InvalidInput(format!("estimator returned {value}"))),
        })
    }
}

fn empty_set_value(objective: &dyn BlockingObjective) -> Result<f64> {
    let value = objective.value(&[])?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidInput(format!("estimator returned {value} for the empty set")))
    }
}

/// Scores `current ∪ {v}` for every candidate in parallel. `None` marks a
/// candidate skipped because the deadline passed.
fn sweep(
    objective: &dyn BlockingObjective,
    current: &[NodeId],
    candidates: &[NodeId],
    options: &SolveOptions,
) -> Result<Vec<Option<f64>>> {
    candidates
        .par_iter()
        .map(|&v| {
            if options.expired() {
                return Ok(None);
            }
            evaluate(objective, &with_node(current, v), v).map(Some)
        })
        .collect()
}

/// Plain greedy: every round scores every remaining candidate and adds the
/// best one, ties to the smallest id.
pub fn greedy(objective: &dyn BlockingObjective, k: usize, options: &SolveOptions) -> Result<CelfTrace> {
    check_budget(objective, k)?;
    let start = Instant::now();
    if options.expired() {
        return Ok(CelfTrace {
            evaluations_used: 0,
            ..CelfTrace::new(0.0)
        });
    }
    let mut trace = CelfTrace::new(empty_set_value(objective)?);
    let mut pool = candidates(objective);
    let mut current: Vec<NodeId> = Vec::new();
    while trace.chosen.len() < k {
        let values = sweep(objective, &current, &pool, options)?;
        trace.evaluations_used += values.iter().flatten().count();
        if values.iter().any(Option::is_none) {
            return Ok(trace);
        }
        let mut best = 0;
        for (i, value) in values.iter().enumerate().skip(1) {
            if value.unwrap() > values[best].unwrap() {
                best = i;
            }
        }
        let v = pool.remove(best);
        current = with_node(&current, v);
        trace.record(v, values[best].unwrap(), start);
    }
    trace.completed = true;
    Ok(trace)
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    gain: f64,
    value: f64,
    node: NodeId,
    /// Number of picks made when `gain` was computed.
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    /// Larger gain first, then smaller node id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Lazy-forward greedy. Stale gains serve as upper bounds; the top entry is
/// re-scored against the current set and picked once its fresh gain is
/// still on top. Matches [`greedy`] pick for pick when the objective is
/// deterministic and submodular.
pub fn celf(objective: &dyn BlockingObjective, k: usize, options: &SolveOptions) -> Result<CelfTrace> {
    check_budget(objective, k)?;
    let start = Instant::now();
    if options.expired() {
        return Ok(CelfTrace {
            evaluations_used: 0,
            ..CelfTrace::new(0.0)
        });
    }
    let mut trace = CelfTrace::new(empty_set_value(objective)?);
    let pool = candidates(objective);
    let values = sweep(objective, &[], &pool, options)?;
    trace.evaluations_used += values.iter().flatten().count();
    if values.iter().any(Option::is_none) {
        return Ok(trace);
    }
    let base = trace.base_value;
    let mut heap: BinaryHeap<Entry> = pool
        .iter()
        .zip(&values)
        .map(|(&node, value)| Entry {
            gain: value.unwrap() - base,
            value: value.unwrap(),
            node,
            round: 0,
        })
        .collect();
    let mut current: Vec<NodeId> = Vec::new();
    while trace.chosen.len() < k {
        let Some(top) = heap.pop() else { break };
        if top.round == trace.chosen.len() {
            current = with_node(&current, top.node);
            trace.record(top.node, top.value, start);
            continue;
        }
        if options.expired() {
            return Ok(trace);
        }
        let value = evaluate(objective, &with_node(&current, top.node), top.node)?;
        trace.evaluations_used += 1;
        heap.push(Entry {
            gain: value - trace.final_score(),
            value,
            node: top.node,
            round: trace.chosen.len(),
        });
    }
    trace.completed = true;
    Ok(trace)
}

/// High-replication Monte Carlo value of a final solution.
pub fn evaluate_solution(
    graph: &Graph,
    s_f: &[NodeId],
    s_t: &[NodeId],
    replications: usize,
    seed: u64,
) -> Result<Estimate> {
    let inst = Instance::new(graph, s_f, s_t)?;
    estimate_blocked(graph, &inst, replications, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::DEFAULT_EXACT_MAX_EDGES;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn four_coin() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (0, 2, 0.5), (1, 2, 0.5)]).unwrap()
    }

    struct Constant {
        n: usize,
        s_f: Vec<NodeId>,
    }

    impl BlockingObjective for Constant {
        fn node_count(&self) -> usize {
            self.n
        }
        fn false_seeds(&self) -> &[NodeId] {
            &self.s_f
        }
        fn kind(&self) -> EstimatorKind {
            EstimatorKind::Exact
        }
        fn value(&self, _s_t: &[NodeId]) -> Result<f64> {
            Ok(1.0)
        }
    }

    struct Failing;

    impl BlockingObjective for Failing {
        fn node_count(&self) -> usize {
            4
        }
        fn false_seeds(&self) -> &[NodeId] {
            &[0]
        }
        fn kind(&self) -> EstimatorKind {
            EstimatorKind::Exact
        }
        fn value(&self, s_t: &[NodeId]) -> Result<f64> {
            if s_t.contains(&2) {
                Err(Error::InvalidInput("boom".into()))
            } else {
                Ok(s_t.len() as f64)
            }
        }
    }

    #[test]
    fn path_picks_the_chokepoint() {
        let g = path3();
        let obj = ExactObjective::new(&g, &[0], DEFAULT_EXACT_MAX_EDGES).unwrap();
        let singles: Vec<f64> = [1, 2].iter().map(|&v| obj.value(&[v]).unwrap()).collect();
        assert_eq!(singles, vec![2.0, 1.0]);
        let g_trace = greedy(&obj, 1, &SolveOptions::default()).unwrap();
        let c_trace = celf(&obj, 1, &SolveOptions::default()).unwrap();
        assert_eq!(g_trace.chosen, vec![1]);
        assert_eq!(c_trace.chosen, vec![1]);
        assert_eq!(g_trace.scores, vec![2.0]);
        assert_eq!(c_trace.evaluations_used, g_trace.evaluations_used);
        assert!(c_trace.completed);
    }

    #[test]
    fn exhaustion_and_constant_ties() {
        let g = path3();
        let obj = ExactObjective::new(&g, &[0], DEFAULT_EXACT_MAX_EDGES).unwrap();
        let t = celf(&obj, 2, &SolveOptions::default()).unwrap();
        assert_eq!(t.solution(), vec![1, 2]);
        assert!(greedy(&obj, 3, &SolveOptions::default()).is_err());
        assert!(celf(&obj, 0, &SolveOptions::default()).is_err());

        let c = Constant { n: 10, s_f: vec![0, 3] };
        for trace in [
            greedy(&c, 4, &SolveOptions::default()).unwrap(),
            celf(&c, 4, &SolveOptions::default()).unwrap(),
        ] {
            assert_eq!(trace.chosen, vec![1, 2, 4, 5]);
            assert!(trace.marginal_gains.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn estimator_failure_names_the_candidate() {
        for result in [
            greedy(&Failing, 2, &SolveOptions::default()),
            celf(&Failing, 2, &SolveOptions::default()),
        ] {
            match result {
                Err(Error::Estimator { candidate, .. }) => assert_eq!(candidate, 2),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn expired_deadline_returns_partial_trace() {
        let g = four_coin();
        let obj = ExactObjective::new(&g, &[0], DEFAULT_EXACT_MAX_EDGES).unwrap();
        let opts = SolveOptions {
            deadline: Some(Instant::now()),
        };
        let t = celf(&obj, 1, &opts).unwrap();
        assert!(!t.completed);
        assert!(t.chosen.is_empty());
    }

    #[test]
    fn evaluate_solution_values() {
        let g = path3();
        assert_eq!(evaluate_solution(&g, &[0], &[], 100, 1).unwrap().mean, 0.0);
        assert_eq!(evaluate_solution(&g, &[0], &[1], 100, 1).unwrap().mean, 2.0);
        let est = evaluate_solution(&four_coin(), &[0], &[1], 10_000, 3).unwrap();
        assert!((est.mean - 1.25).abs() <= 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn per_set_seeding_is_order_free() {
        let g = four_coin();
        let obj = McsObjective::new(&g, &[0], 200, 11).unwrap();
        assert_eq!(obj.value(&[1, 2]).unwrap(), obj.value(&[1, 2]).unwrap());
        assert_eq!(obj.value(&[]).unwrap(), 0.0);
        assert!(McsObjective::new(&g, &[0], 0, 11).is_err());
    }

    #[test]
    fn exact_objective_refuses_large_graphs() {
        let edges: Vec<_> = (0..25).map(|i| (i, i + 1, 0.5)).collect();
        let g = Graph::from_edges(26, edges).unwrap();
        assert!(matches!(
            ExactObjective::new(&g, &[0], DEFAULT_EXACT_MAX_EDGES),
            Err(Error::TooLarge { .. })
        ));
    }
}
