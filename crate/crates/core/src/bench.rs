//! Runtime-to-target and quality-within-budget comparisons of seed
//! selection methods.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cascade::DEFAULT_EVAL_REPLICATIONS;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeStats};
use crate::io::atomic_write;
use crate::model::MlpModel;
use crate::optimizer::{
    celf, evaluate_solution, greedy, sorted_prefix, BlockingObjective, CelfTrace, McsObjective,
    NieObjective, SolveOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "nie-celf")]
    NieCelf,
    #[serde(rename = "nie-greedy")]
    NieGreedy,
    #[serde(rename = "mcs-celf")]
    McsCelf,
    #[serde(rename = "mcs-greedy")]
    McsGreedy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::NieCelf, Method::NieGreedy, Method::McsCelf, Method::McsGreedy];

    pub fn name(self) -> &'static str {
        match self {
            Method::NieCelf => "nie-celf",
            Method::NieGreedy => "nie-greedy",
            Method::McsCelf => "mcs-celf",
            Method::McsGreedy => "mcs-greedy",
        }
    }

    pub fn uses_model(self) -> bool {
        matches!(self, Method::NieCelf | Method::NieGreedy)
    }

    fn lazy(self) -> bool {
        matches!(self, Method::NieCelf | Method::McsCelf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchProblem {
    pub id: String,
    pub s_f: Vec<NodeId>,
    /// True seed budget `K`.
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TargetSource {
    /// The evaluated quality of the NIE-CELF solution to the same problem.
    NieFinal,
    Explicit(f64),
}

/// Graph resources and fixed seeds shared by every run.
pub struct BenchContext<'a> {
    pub graph: &'a Graph,
    pub stats: Option<&'a NodeStats>,
    pub model: Option<&'a MlpModel>,
    /// Replications of the estimator inside MCS methods.
    pub mcs_replications: usize,
    pub mcs_seed: u64,
    /// Replications used to score solutions.
    pub eval_replications: usize,
    pub eval_seed: u64,
    /// Offline costs reported next to the solve-phase runtimes.
    pub precompute_seconds: Option<f64>,
    pub training_seconds: Option<f64>,
}

impl<'a> BenchContext<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        BenchContext {
            graph,
            stats: None,
            model: None,
            mcs_replications: DEFAULT_EVAL_REPLICATIONS,
            mcs_seed: 0,
            eval_replications: DEFAULT_EVAL_REPLICATIONS,
            eval_seed: 1,
            precompute_seconds: None,
            training_seconds: None,
        }
    }

    fn objective(&self, method: Method, s_f: &[NodeId]) -> Result<Box<dyn BlockingObjective + 'a>> {
        if method.uses_model() {
            let (Some(stats), Some(model)) = (self.stats, self.model) else {
                return Err(Error::Config(format!("{method} needs node stats and a trained model")));
            };
            Ok(Box::new(NieObjective::new(self.graph, stats, model, s_f)?))
        } else {
            Ok(Box::new(McsObjective::new(
                self.graph,
                s_f,
                self.mcs_replications,
                self.mcs_seed,
            )?))
        }
    }

    /// Solves one problem; only this call is timed.
    fn solve(&self, method: Method, problem: &BenchProblem, options: &SolveOptions) -> Result<(CelfTrace, Duration)> {
        let objective = self.objective(method, &problem.s_f)?;
        let start = Instant::now();
        let trace = if method.lazy() {
            celf(objective.as_ref(), problem.k, options)?
        } else {
            greedy(objective.as_ref(), problem.k, options)?
        };
        Ok((trace, start.elapsed()))
    }

    fn quality(&self, s_f: &[NodeId], s_t: &[NodeId]) -> Result<f64> {
        Ok(evaluate_solution(self.graph, s_f, s_t, self.eval_replications, self.eval_seed)?.mean)
    }

    fn environment(&self, protocol: &str, time_limit_seconds: f64) -> BenchEnvironment {
        BenchEnvironment {
            protocol: protocol.to_string(),
            graph_fingerprint: self.graph.fingerprint().to_string(),
            node_count: self.graph.node_count(),
            edge_count: self.graph.edge_count(),
            mcs_replications: self.mcs_replications,
            mcs_seed: self.mcs_seed,
            eval_replications: self.eval_replications,
            eval_seed: self.eval_seed,
            time_limit_seconds,
            h_radius: self.model.map(|m| m.h_radius),
            threads: rayon::current_num_threads(),
            precompute_seconds: self.precompute_seconds,
            training_seconds: self.training_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub problem_id: String,
    pub method: Method,
    /// Wall-clock seconds of the solve phase; environment dependent.
    pub runtime_seconds: f64,
    /// Monte Carlo quality of the reported solution; empty when there is none.
    pub blocked_influence: Option<f64>,
    pub target: Option<f64>,
    pub evaluations_used: usize,
    pub reached_target: bool,
    pub picks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEnvironment {
    pub protocol: String,
    pub graph_fingerprint: String,
    pub node_count: usize,
    pub edge_count: usize,
    pub mcs_replications: usize,
    pub mcs_seed: u64,
    pub eval_replications: usize,
    pub eval_seed: u64,
    pub time_limit_seconds: f64,
    pub h_radius: Option<u32>,
    pub threads: usize,
    pub precompute_seconds: Option<f64>,
    pub training_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub environment: BenchEnvironment,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// Path of the JSON metadata written next to `csv_path`.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        let mut name = csv_path.as_os_str().to_owned();
        name.push(".meta.json");
        PathBuf::from(name)
    }

    /// Writes the CSV rows and the JSON sidecar, each atomically.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        atomic_write(csv_path, &self.to_csv()?)?;
        let meta = serde_json::to_vec_pretty(self)?;
        atomic_write(&Self::sidecar_path(csv_path), &meta)
    }
}

fn check_methods(ctx: &BenchContext<'_>, methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    if methods.iter().any(|m| m.uses_model()) && (ctx.model.is_none() || ctx.stats.is_none()) {
        return Err(Error::Config("NIE methods need node stats and a trained model".into()));
    }
    Ok(())
}

/// For each problem, fixes a target quality and measures how long each
/// method takes to produce a solution at least that good.
///
/// Incumbents are scored after the timed solve. When the prefix after pick
/// `i` is the first to reach the target, the time of pick `i - 1` is
/// reported (pick `i` itself when `i` is the first pick). Methods that never
/// reach it report the timeout.
pub fn run_time_to_target(
    ctx: &BenchContext<'_>,
    problems: &[BenchProblem],
    methods: &[Method],
    target_source: TargetSource,
    timeout: Duration,
) -> Result<BenchReport> {
    check_methods(ctx, methods)?;
    if target_source == TargetSource::NieFinal {
        check_methods(ctx, &[Method::NieCelf])?;
    }
    let mut rows = Vec::new();
    for problem in problems {
        let (target, reference) = match target_source {
            TargetSource::Explicit(value) => (value, None),
            TargetSource::NieFinal => {
                let (trace, elapsed) = ctx.solve(Method::NieCelf, problem, &SolveOptions::default())?;
                let quality = ctx.quality(&problem.s_f, &trace.solution())?;
                let row = BenchRow {
                    problem_id: problem.id.clone(),
                    method: Method::NieCelf,
                    runtime_seconds: elapsed.as_secs_f64(),
                    blocked_influence: Some(quality),
                    target: Some(quality),
                    evaluations_used: trace.evaluations_used,
                    reached_target: true,
                    picks: trace.chosen.len(),
                };
                (quality, Some(row))
            }
        };
        for &method in methods {
            if method == Method::NieCelf {
                if let Some(row) = &reference {
                    rows.push(row.clone());
                    continue;
                }
            }
            log::info!("{}: running {method}", problem.id);
            let (trace, elapsed) = ctx.solve(method, problem, &SolveOptions::with_budget(timeout))?;
            let mut reached = None;
            let mut last_quality = None;
            for len in 1..=trace.chosen.len() {
                let quality = ctx.quality(&problem.s_f, &sorted_prefix(&trace.chosen, len))?;
                last_quality = Some(quality);
                if quality >= target {
                    reached = Some((len, quality));
                    break;
                }
            }
            let row = match reached {
                Some((len, quality)) => BenchRow {
                    problem_id: problem.id.clone(),
                    method,
                    runtime_seconds: trace.pick_times[len.saturating_sub(2)].as_secs_f64(),
                    blocked_influence: Some(quality),
                    target: Some(target),
                    evaluations_used: trace.evaluations_used,
                    reached_target: true,
                    picks: len,
                },
                None => BenchRow {
                    problem_id: problem.id.clone(),
                    method,
                    runtime_seconds: if trace.completed {
                        elapsed.as_secs_f64()
                    } else {
                        timeout.as_secs_f64()
                    },
                    blocked_influence: last_quality,
                    target: Some(target),
                    evaluations_used: trace.evaluations_used,
                    reached_target: false,
                    picks: trace.chosen.len(),
                },
            };
            rows.push(row);
        }
    }
    Ok(BenchReport {
        environment: ctx.environment("time_to_target", timeout.as_secs_f64()),
        rows,
    })
}

/// Runs every method under a wall-clock budget. Complete solutions are
/// scored by Monte Carlo; incomplete runs report no quality.
pub fn run_quality_within_budget(
    ctx: &BenchContext<'_>,
    problems: &[BenchProblem],
    methods: &[Method],
    budget: Duration,
) -> Result<BenchReport> {
    check_methods(ctx, methods)?;
    let mut rows = Vec::new();
    for problem in problems {
        for &method in methods {
            log::info!("{}: running {method}", problem.id);
            let (trace, elapsed) = ctx.solve(method, problem, &SolveOptions::with_budget(budget))?;
            let quality = if trace.completed {
                Some(ctx.quality(&problem.s_f, &trace.solution())?)
            } else {
                None
            };
            rows.push(BenchRow {
                problem_id: problem.id.clone(),
                method,
                runtime_seconds: elapsed.as_secs_f64(),
                blocked_influence: quality,
                target: None,
                evaluations_used: trace.evaluations_used,
                reached_target: trace.completed,
                picks: trace.chosen.len(),
            });
        }
    }
    Ok(BenchReport {
        environment: ctx.environment("quality_within_budget", budget.as_secs_f64()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> Graph {
        // 0 feeds 1..=4 which each feed two leaves
        let mut edges = Vec::new();
        for hub in 1..=4 {
            edges.push((0, hub, 1.0));
            edges.push((hub, 3 + 2 * hub, 0.5));
            edges.push((hub, 4 + 2 * hub, 0.5));
        }
        Graph::from_edges(13, edges).unwrap()
    }

    fn problem() -> BenchProblem {
        BenchProblem {
            id: "p0".into(),
            s_f: vec![0],
            k: 2,
        }
    }

    fn ctx(graph: &Graph) -> BenchContext<'_> {
        BenchContext {
            mcs_replications: 64,
            eval_replications: 500,
            ..BenchContext::new(graph)
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("celf".parse::<Method>().is_err());
    }

    #[test]
    fn nie_without_model_is_a_config_error() {
        let g = star();
        let err = run_quality_within_budget(&ctx(&g), &[problem()], &[Method::NieCelf], Duration::from_secs(1));
        assert!(matches!(err, Err(Error::Config(_))));
        let err = run_time_to_target(
            &ctx(&g),
            &[problem()],
            &[Method::McsCelf],
            TargetSource::NieFinal,
            Duration::from_secs(1),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn degenerate_budget_reports_no_quality() {
        let g = star();
        let report = run_quality_within_budget(
            &ctx(&g),
            &[problem()],
            &[Method::McsCelf, Method::McsGreedy],
            Duration::ZERO,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.blocked_influence.is_none() && !r.reached_target));
    }

    #[test]
    fn quality_is_reproducible() {
        let g = star();
        let run = || {
            run_quality_within_budget(&ctx(&g), &[problem()], &[Method::McsCelf], Duration::from_secs(60))
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.rows[0].blocked_influence, b.rows[0].blocked_influence);
        let q = a.rows[0].blocked_influence.unwrap();
        assert!((0.0..=13.0).contains(&q));
        // hubs are the only useful picks
        assert_eq!(a.rows[0].picks, 2);
    }

    #[test]
    fn explicit_targets() {
        let g = star();
        let report = run_time_to_target(
            &ctx(&g),
            &[problem()],
            &[Method::McsGreedy],
            TargetSource::Explicit(0.5),
            Duration::from_secs(60),
        )
        .unwrap();
        let row = &report.rows[0];
        assert!(row.reached_target);
        assert_eq!(row.picks, 1);

        let report = run_time_to_target(
            &ctx(&g),
            &[problem()],
            &[Method::McsGreedy],
            TargetSource::Explicit(100.0),
            Duration::from_millis(1),
        )
        .unwrap();
        assert!(!report.rows[0].reached_target);
    }

    #[test]
    fn csv_and_sidecar_are_written() {
        let g = star();
        let report = run_quality_within_budget(&ctx(&g), &[problem()], &[Method::McsCelf], Duration::ZERO).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        report.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("problem_id,method,runtime_seconds,blocked_influence"));
        assert!(text.contains("p0,mcs-celf,"));
        let meta: BenchReport =
            serde_json::from_slice(&std::fs::read(BenchReport::sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(meta.environment.graph_fingerprint, g.fingerprint());
    }
}
