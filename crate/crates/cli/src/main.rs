mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use common::{emit, json_line, load_or_build_stats, parse_seed_set, GraphArgs};
use nie_core::bench::{run_quality_within_budget, run_time_to_target, BenchContext, BenchProblem, Method, TargetSource};
use nie_core::cascade::{DEFAULT_EVAL_REPLICATIONS, DEFAULT_EXACT_MAX_EDGES, DEFAULT_LABEL_REPLICATIONS};
use nie_core::datagen::{generate_dataset, sample_false_seeds, Dataset, GenerateOptions, SamplerConfig};
use nie_core::model::{load_model_for_graph, save_model_path, train, ModelMeta, TrainConfig};
use nie_core::optimizer::{
    celf, evaluate_solution, greedy, BlockingObjective, ExactObjective, McsObjective, NieObjective, SolveOptions,
};
use nie_core::seed::tagged_seed;
use nie_core::{exact_blocked, ClosenessMode, Instance};

#[derive(Debug, Parser)]
#[command(name = "nie", version, about = "Influence blocking maximization with a neural blocked-influence estimator")]
struct Cli {
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute and cache closeness and clustering for every node
    Precompute(PrecomputeArgs),
    /// Sample instances and label them by Monte Carlo simulation
    Gendata(GendataArgs),
    /// Train the MLP on a labeled dataset
    Train(TrainArgs),
    /// Choose true seeds for a false seed set
    Solve(SolveArgs),
    /// Monte Carlo blocked influence of a given solution
    Eval(EvalArgs),
    /// Compare methods by time-to-target or quality-within-budget
    Bench(BenchArgs),
    /// Exact blocked influence by enumerating live-edge worlds (small graphs)
    Oracle(OracleArgs),
    /// Write a synthetic power-law digraph as an edge list
    Synth(SynthArgs),
}

#[derive(Debug, clap::Args)]
struct StatsArgs {
    /// Node stats cache; created or refreshed when missing, stale or corrupt
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Closeness samples; exact closeness when omitted on graphs up to 50,000 nodes
    #[arg(long)]
    closeness_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl StatsArgs {
    fn mode(&self, node_count: usize) -> ClosenessMode {
        match self.closeness_samples {
            Some(k) => ClosenessMode::Sampled { k, seed: self.seed },
            None => ClosenessMode::auto(node_count, self.seed),
        }
    }
}

#[derive(Debug, clap::Args)]
struct PrecomputeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    closeness_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, clap::Args)]
struct GendataArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    stats: StatsArgs,
    /// Skip feature caching (records then carry only seeds and labels)
    #[arg(long)]
    no_features: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = DEFAULT_LABEL_REPLICATIONS)]
    label_replications: usize,
    #[arg(long, default_value_t = 2)]
    h: u32,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 9.0)]
    pareto_shape: f64,
    #[arg(long, default_value_t = 10.0)]
    pareto_scale: f64,
    #[arg(long, default_value_t = 50)]
    k_cap: usize,
}

#[derive(Debug, clap::Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Needed only when the dataset lacks cached features
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    uniform_probability: Option<f64>,
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Training report path (default: <out>.report.json)
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    /// Hidden layer widths
    #[arg(long, value_delimiter = ',', default_value = "128,128")]
    hidden: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Nie,
    Mcs,
    Exact,
}

#[derive(Debug, clap::Args)]
struct SolveArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    stats: StatsArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// False seeds: comma-separated ids or @file
    #[arg(long)]
    sf: String,
    /// True seed budget
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "nie")]
    estimator: EstimatorArg,
    /// Plain greedy instead of lazy-forward CELF
    #[arg(long)]
    greedy: bool,
    /// Replications per MCS estimator call
    #[arg(long, default_value_t = DEFAULT_EVAL_REPLICATIONS)]
    mcs_replications: usize,
    /// Replications for the final evaluation of the solution
    #[arg(long, default_value_t = DEFAULT_EVAL_REPLICATIONS)]
    eval_replications: usize,
    #[arg(long, default_value_t = DEFAULT_EXACT_MAX_EDGES)]
    max_edges: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value = "")]
    sf: String,
    #[arg(long, default_value = "")]
    st: String,
    /// Read s_f and s_t from a solution file written by `solve`
    #[arg(long, conflicts_with_all = ["sf", "st"])]
    solution: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EVAL_REPLICATIONS)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    TimeToTarget,
    Budget,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    stats: StatsArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "budget")]
    protocol: Protocol,
    #[arg(long, value_delimiter = ',', default_value = "nie-celf,mcs-celf")]
    methods: Vec<String>,
    /// One explicit false seed set (comma list or @file)
    #[arg(long, conflicts_with = "problems")]
    sf: Option<String>,
    /// Number of false seed sets to sample from the high out-degree pool
    #[arg(long, default_value_t = 1)]
    problems: usize,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// True seed budget; defaults to |S_f| per problem
    #[arg(long)]
    k: Option<usize>,
    /// Budget (budget protocol) or timeout (time-to-target), in seconds
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    /// Fixed target quality for time-to-target; default is NIE-CELF's own
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EVAL_REPLICATIONS)]
    mcs_replications: usize,
    #[arg(long, default_value_t = DEFAULT_EVAL_REPLICATIONS)]
    eval_replications: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    sf: String,
    #[arg(long, default_value = "")]
    st: String,
    #[arg(long, default_value_t = DEFAULT_EXACT_MAX_EDGES)]
    max_edges: usize,
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 768)]
    nodes: usize,
    #[arg(long, default_value_t = 1532)]
    edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write 1/in-degree probabilities as a third column
    #[arg(long)]
    with_probabilities: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Solution {
    s_f: Vec<usize>,
    s_t: Vec<usize>,
    k: usize,
    estimator: String,
    predicted: f64,
    mcs_value: f64,
    mcs_replications: usize,
}

fn precompute(args: PrecomputeArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let mode = match args.closeness_samples {
        Some(k) => ClosenessMode::Sampled { k, seed: args.seed },
        None => ClosenessMode::auto(graph.node_count(), args.seed),
    };
    let start = Instant::now();
    let (_, computed) = load_or_build_stats(&graph, Some(&args.out), mode)?;
    if computed > 0.0 {
        println!("wrote {} in {:.3} s", args.out.display(), start.elapsed().as_secs_f64());
    } else {
        println!("{} is up to date", args.out.display());
    }
    Ok(())
}

fn gendata(args: GendataArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let stats = if args.no_features {
        None
    } else {
        Some(load_or_build_stats(&graph, args.stats.stats.as_deref(), args.stats.mode(graph.node_count()))?.0)
    };
    let options = GenerateOptions {
        count: args.count,
        label_replications: args.label_replications,
        sampler: SamplerConfig {
            rho: args.rho,
            pareto_shape: args.pareto_shape,
            pareto_scale: args.pareto_scale,
            k_cap: args.k_cap,
        },
        h_radius: args.h,
        master_seed: args.stats.seed,
    };
    let start = Instant::now();
    let dataset = generate_dataset(&graph, stats.as_ref(), &options)?;
    dataset.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} records to {} in {:.3} s",
        dataset.records.len(),
        args.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let mut dataset = Dataset::load(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    if dataset.records.iter().any(|r| r.features.is_none()) {
        let Some(graph_path) = &args.graph else {
            bail!("dataset has records without cached features; pass --graph to compute them");
        };
        let graph = GraphArgs {
            graph: graph_path.clone(),
            uniform_probability: args.uniform_probability,
        }
        .load()?;
        let mode = ClosenessMode::auto(graph.node_count(), args.seed);
        let (stats, _) = load_or_build_stats(&graph, args.stats.as_deref(), mode)?;
        dataset.fill_features(&graph, &stats)?;
    }
    let (inputs, labels) = dataset.training_arrays()?;
    let config = TrainConfig {
        batch_size: args.batch_size,
        learning_rate: args.lr,
        max_epochs: args.max_epochs,
        patience: args.patience,
        val_fraction: args.val_fraction,
        hidden: args.hidden,
    };
    let meta = ModelMeta {
        h_radius: dataset.h_radius,
        graph_fingerprint: dataset.graph_fingerprint.clone(),
    };
    let start = Instant::now();
    let (model, report) = train(&inputs, &labels, &config, meta, args.seed)?;
    save_model_path(&model, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let report_path = args.report.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".report.json");
        p.into()
    });
    emit(Some(&report_path), &json_line(&report)?)?;
    println!(
        "trained {} epochs (best {}) in {:.3} s; validation mse {:.6}",
        report.epochs_run,
        report.best_epoch,
        start.elapsed().as_secs_f64(),
        report.validation_mse[report.best_epoch - 1]
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let s_f = parse_seed_set(&args.sf, &graph)?;
    let seed = args.stats.seed;
    let stats_and_model;
    let objective: Box<dyn BlockingObjective> = match args.estimator {
        EstimatorArg::Nie => {
            let Some(model_path) = &args.model else {
                bail!("--estimator nie needs --model");
            };
            let model = load_model_for_graph(model_path, &graph)
                .with_context(|| format!("loading model {}", model_path.display()))?;
            let (stats, _) = load_or_build_stats(&graph, args.stats.stats.as_deref(), args.stats.mode(graph.node_count()))?;
            stats_and_model = (stats, model);
            Box::new(NieObjective::new(&graph, &stats_and_model.0, &stats_and_model.1, &s_f)?)
        }
        EstimatorArg::Mcs => Box::new(McsObjective::new(
            &graph,
            &s_f,
            args.mcs_replications,
            tagged_seed(seed, "mcs", 0),
        )?),
        EstimatorArg::Exact => Box::new(ExactObjective::new(&graph, &s_f, args.max_edges)?),
    };
    let start = Instant::now();
    let trace = if args.greedy {
        greedy(objective.as_ref(), args.k, &SolveOptions::default())?
    } else {
        celf(objective.as_ref(), args.k, &SolveOptions::default())?
    };
    log::info!(
        "selected {} seeds with {} evaluations in {:.3} s",
        trace.chosen.len(),
        trace.evaluations_used,
        start.elapsed().as_secs_f64()
    );
    let s_t = trace.solution();
    let estimate = evaluate_solution(&graph, &s_f, &s_t, args.eval_replications, tagged_seed(seed, "eval", 0))?;
    let solution = Solution {
        s_f,
        s_t,
        k: args.k,
        estimator: objective.kind().name().to_string(),
        predicted: trace.final_score(),
        mcs_value: estimate.mean,
        mcs_replications: estimate.replications,
    };
    emit(args.out.as_deref(), &json_line(&solution)?)
}

fn eval(args: EvalArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let (s_f, s_t) = match &args.solution {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let ids = |key: &str| -> Result<Vec<usize>> {
                Ok(serde_json::from_value(value.get(key).cloned().with_context(|| format!("solution lacks {key}"))?)?)
            };
            (ids("s_f")?, ids("s_t")?)
        }
        None => (parse_seed_set(&args.sf, &graph)?, parse_seed_set(&args.st, &graph)?),
    };
    let estimate = evaluate_solution(&graph, &s_f, &s_t, args.replications, args.seed)?;
    emit(args.out.as_deref(), &json_line(&estimate)?)
}

fn bench(args: BenchArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<nie_core::Result<Vec<_>>>()?;
    let needs_model = methods.iter().any(|m| m.uses_model())
        || (args.protocol == Protocol::TimeToTarget && args.target.is_none());
    let seed = args.stats.seed;
    let mut precompute_seconds = None;
    let resources = if needs_model {
        let Some(model_path) = &args.model else {
            bail!("NIE methods and NIE-derived targets need --model");
        };
        let model = load_model_for_graph(model_path, &graph)
            .with_context(|| format!("loading model {}", model_path.display()))?;
        let (stats, seconds) =
            load_or_build_stats(&graph, args.stats.stats.as_deref(), args.stats.mode(graph.node_count()))?;
        precompute_seconds = Some(seconds);
        Some((stats, model))
    } else {
        None
    };

    let problems: Vec<BenchProblem> = match &args.sf {
        Some(spec) => {
            let s_f = parse_seed_set(spec, &graph)?;
            vec![BenchProblem {
                id: "p0".into(),
                k: args.k.unwrap_or(s_f.len()),
                s_f,
            }]
        }
        None => {
            let sampler = SamplerConfig {
                rho: args.rho,
                ..SamplerConfig::default()
            };
            (0..args.problems)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(tagged_seed(seed, "problem", i as u64));
                    let s_f = sample_false_seeds(&graph, &sampler, &mut rng)?;
                    Ok(BenchProblem {
                        id: format!("p{i}"),
                        k: args.k.unwrap_or(s_f.len()),
                        s_f,
                    })
                })
                .collect::<nie_core::Result<_>>()?
        }
    };

    let mut ctx = BenchContext::new(&graph);
    ctx.stats = resources.as_ref().map(|r| &r.0);
    ctx.model = resources.as_ref().map(|r| &r.1);
    ctx.mcs_replications = args.mcs_replications;
    ctx.mcs_seed = tagged_seed(seed, "mcs", 0);
    ctx.eval_replications = args.eval_replications;
    ctx.eval_seed = tagged_seed(seed, "eval", 0);
    ctx.precompute_seconds = precompute_seconds;

    if !(args.seconds >= 0.0 && args.seconds.is_finite()) {
        bail!("--seconds must be a finite, non-negative number");
    }
    let limit = Duration::from_secs_f64(args.seconds);
    let report = match args.protocol {
        Protocol::Budget => run_quality_within_budget(&ctx, &problems, &methods, limit)?,
        Protocol::TimeToTarget => {
            let target = match args.target {
                Some(v) => TargetSource::Explicit(v),
                None => TargetSource::NieFinal,
            };
            run_time_to_target(&ctx, &problems, &methods, target, limit)?
        }
    };
    report.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    for row in &report.rows {
        let quality = row.blocked_influence.map_or("-".to_string(), |q| format!("{q:.4}"));
        println!(
            "{} {:<10} {:>10.4} s  quality {:>10}  evaluations {}",
            row.problem_id, row.method, row.runtime_seconds, quality, row.evaluations_used
        );
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let graph = args.graph.load()?;
    let s_f = parse_seed_set(&args.sf, &graph)?;
    let s_t = parse_seed_set(&args.st, &graph)?;
    let inst = Instance::new(&graph, &s_f, &s_t)?;
    let value = exact_blocked(&graph, &inst, args.max_edges)?;
    println!("{value}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut graph = nie_core::synth::power_law_digraph(args.nodes, args.edges, args.seed)?;
    if args.with_probabilities {
        graph = graph.assign_degree_probabilities();
    }
    let mut bytes = Vec::new();
    nie_core::synth::write_edge_list(&graph, &mut bytes, args.with_probabilities)?;
    emit(Some(&args.out), &bytes)?;
    println!("wrote {} nodes, {} edges to {}", graph.node_count(), graph.edge_count(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Precompute(a) => precompute(a),
        Command::Gendata(a) => gendata(a),
        Command::Train(a) => train_cmd(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Oracle(a) => oracle(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
