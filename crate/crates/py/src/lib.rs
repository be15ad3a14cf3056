//! Python module `nie`: graphs, cascade estimates, features, the MLP
//! surrogate and seed selection.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nie_core::cascade::{DEFAULT_EVAL_REPLICATIONS, DEFAULT_EXACT_MAX_EDGES, DEFAULT_LABEL_REPLICATIONS};
use nie_core::datagen::{generate_dataset, sample_instance, GenerateOptions, SamplerConfig};
use nie_core::graph::{load_edge_list_path, load_stats, save_stats, HeaderMode};
use nie_core::model::{load_model_for_graph, save_model_path, ModelMeta, TrainConfig};
use nie_core::optimizer::{celf, greedy, BlockingObjective, ExactObjective, McsObjective, NieObjective, SolveOptions};
use nie_core::{ClosenessMode, Error, FeatureVector, Instance};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn instance(graph: &nie_core::Graph, s_f: &[usize], s_t: &[usize]) -> PyResult<Instance> {
    Instance::new(graph, s_f, s_t).map_err(to_py)
}

/// Directed graph with per-edge activation probabilities.
#[pyclass(frozen, module = "nie")]
struct Graph {
    inner: nie_core::Graph,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(node_count: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(Graph {
            inner: nie_core::Graph::from_edges(node_count, edges).map_err(to_py)?,
        })
    }

    /// Reads an edge list. Without a probability column every edge into
    /// `v` gets `1 / in_degree(v)`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let loaded = load_edge_list_path(&path, HeaderMode::Auto).map_err(to_py)?;
        let inner = if loaded.report.explicit_probabilities {
            loaded.graph
        } else {
            loaded.graph.assign_degree_probabilities()
        };
        Ok(Graph { inner })
    }

    /// Preferential-attachment digraph with 1/in-degree probabilities.
    #[staticmethod]
    #[pyo3(signature = (node_count, edge_count, seed=0))]
    fn power_law(node_count: usize, edge_count: usize, seed: u64) -> PyResult<Self> {
        let g = nie_core::synth::power_law_digraph(node_count, edge_count, seed).map_err(to_py)?;
        Ok(Graph {
            inner: g.assign_degree_probabilities(),
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint().to_string()
    }

    fn successors(&self, v: usize) -> PyResult<Vec<usize>> {
        self.inner.check_node(v).map_err(to_py)?;
        Ok(self.inner.successors(v).to_vec())
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().collect()
    }

    fn with_uniform_probability(&self, p: f64) -> PyResult<Self> {
        Ok(Graph {
            inner: self.inner.with_uniform_probability(p).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

/// Per-node closeness and clustering.
#[pyclass(frozen, module = "nie")]
struct NodeStats {
    inner: nie_core::NodeStats,
    mode: ClosenessMode,
}

#[pymethods]
impl NodeStats {
    /// Exact closeness unless `samples` is given.
    #[staticmethod]
    #[pyo3(signature = (graph, samples=None, seed=0))]
    fn compute(py: Python<'_>, graph: &Graph, samples: Option<usize>, seed: u64) -> PyResult<Self> {
        let mode = match samples {
            Some(k) => ClosenessMode::Sampled { k, seed },
            None => ClosenessMode::Exact,
        };
        let inner = py
            .detach(|| nie_core::compute_node_stats(&graph.inner, mode))
            .map_err(to_py)?;
        Ok(NodeStats { inner, mode })
    }

    #[staticmethod]
    fn load(path: PathBuf, graph: &Graph) -> PyResult<Self> {
        Ok(NodeStats {
            inner: load_stats(&path, &graph.inner).map_err(to_py)?,
            mode: ClosenessMode::Exact,
        })
    }

    fn save(&self, path: PathBuf, graph: &Graph) -> PyResult<()> {
        save_stats(&self.inner, &graph.inner, self.mode, &path).map_err(to_py)
    }

    #[getter]
    fn closeness(&self) -> Vec<f64> {
        self.inner.closeness.clone()
    }

    #[getter]
    fn clustering(&self) -> Vec<f64> {
        self.inner.clustering.clone()
    }
}

/// Trained blocked-influence regressor.
#[pyclass(frozen, module = "nie")]
struct Model {
    inner: nie_core::MlpModel,
}

#[pymethods]
impl Model {
    /// Loads a model and checks that it was trained on `graph`.
    #[staticmethod]
    fn load(path: PathBuf, graph: &Graph) -> PyResult<Self> {
        Ok(Model {
            inner: load_model_for_graph(&path, &graph.inner).map_err(to_py)?,
        })
    }

    /// Trains on raw feature rows; returns the model and the per-epoch
    /// train/validation MSE curves.
    #[staticmethod]
    #[pyo3(signature = (features, labels, graph, h=2, seed=0, batch_size=512, learning_rate=0.05,
                        max_epochs=200, patience=10, val_fraction=0.1, hidden=vec![128, 128]))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        features: Vec<[f64; 7]>,
        labels: Vec<f64>,
        graph: &Graph,
        h: u32,
        seed: u64,
        batch_size: usize,
        learning_rate: f64,
        max_epochs: usize,
        patience: usize,
        val_fraction: f64,
        hidden: Vec<usize>,
    ) -> PyResult<(Self, Vec<f64>, Vec<f64>)> {
        let config = TrainConfig {
            batch_size,
            learning_rate,
            max_epochs,
            patience,
            val_fraction,
            hidden,
        };
        let meta = ModelMeta {
            h_radius: h,
            graph_fingerprint: graph.inner.fingerprint().to_string(),
        };
        let (inner, report) = py
            .detach(|| nie_core::model::train(&features, &labels, &config, meta, seed))
            .map_err(to_py)?;
        Ok((Model { inner }, report.train_mse, report.validation_mse))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model_path(&self.inner, &path).map_err(to_py)
    }

    fn predict(&self, features: [f64; 7]) -> f64 {
        self.inner.predict(&features)
    }

    #[getter]
    fn h_radius(&self) -> u32 {
        self.inner.h_radius
    }
}

/// Monte Carlo blocked influence; returns `(mean, std_error)`.
#[pyfunction]
#[pyo3(signature = (graph, s_f, s_t, replications=DEFAULT_EVAL_REPLICATIONS, seed=0))]
fn estimate_blocked(
    py: Python<'_>,
    graph: &Graph,
    s_f: Vec<usize>,
    s_t: Vec<usize>,
    replications: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let inst = instance(&graph.inner, &s_f, &s_t)?;
    let est = py
        .detach(|| nie_core::estimate_blocked(&graph.inner, &inst, replications, seed))
        .map_err(to_py)?;
    Ok((est.mean, est.std_error))
}

/// Exact blocked influence by live-edge enumeration.
#[pyfunction]
#[pyo3(signature = (graph, s_f, s_t, max_edges=DEFAULT_EXACT_MAX_EDGES))]
fn exact_blocked(graph: &Graph, s_f: Vec<usize>, s_t: Vec<usize>, max_edges: usize) -> PyResult<f64> {
    let inst = instance(&graph.inner, &s_f, &s_t)?;
    nie_core::exact_blocked(&graph.inner, &inst, max_edges).map_err(to_py)
}

/// `[d_f, b_f, c_f, d_t, b_t, c_t, p]` for an instance.
#[pyfunction]
#[pyo3(signature = (graph, stats, s_f, s_t, h=2))]
fn featurize(graph: &Graph, stats: &NodeStats, s_f: Vec<usize>, s_t: Vec<usize>, h: u32) -> PyResult<[f64; 7]> {
    let inst = instance(&graph.inner, &s_f, &s_t)?;
    let fv: FeatureVector = nie_core::featurize(&graph.inner, &stats.inner, &inst, h).map_err(to_py)?;
    Ok(fv.to_array())
}

/// Samples one instance the way the data generator does; returns `(s_f, s_t)`.
#[pyfunction]
#[pyo3(signature = (graph, seed=0, rho=0.1, k_cap=50))]
fn sample_problem(graph: &Graph, seed: u64, rho: f64, k_cap: usize) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let config = SamplerConfig {
        rho,
        k_cap,
        ..SamplerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = sample_instance(&graph.inner, &config, &mut rng).map_err(to_py)?;
    Ok((inst.s_f().to_vec(), inst.s_t().to_vec()))
}

/// Labeled records `(s_f, s_t, label, features)`.
#[pyfunction]
#[pyo3(signature = (graph, stats, count, label_replications=DEFAULT_LABEL_REPLICATIONS, seed=0, h=2, rho=0.1, k_cap=50))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn generate(
    py: Python<'_>,
    graph: &Graph,
    stats: &NodeStats,
    count: usize,
    label_replications: usize,
    seed: u64,
    h: u32,
    rho: f64,
    k_cap: usize,
) -> PyResult<Vec<(Vec<usize>, Vec<usize>, f64, [f64; 7])>> {
    let options = GenerateOptions {
        count,
        label_replications,
        sampler: SamplerConfig {
            rho,
            k_cap,
            ..SamplerConfig::default()
        },
        h_radius: h,
        master_seed: seed,
    };
    let dataset = py
        .detach(|| generate_dataset(&graph.inner, Some(&stats.inner), &options))
        .map_err(to_py)?;
    Ok(dataset
        .records
        .into_iter()
        .map(|r| (r.s_f, r.s_t, r.label, r.features.unwrap_or_default()))
        .collect())
}

/// Greedy seed selection. `estimator` is "nie" (needs `model` and
/// `stats`), "mcs" or "exact". Returns a dict describing the run.
#[pyfunction]
#[pyo3(signature = (graph, s_f, k, estimator="nie", model=None, stats=None,
                    replications=DEFAULT_EVAL_REPLICATIONS, seed=0, lazy=true))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    graph: &Graph,
    s_f: Vec<usize>,
    k: usize,
    estimator: &str,
    model: Option<&Model>,
    stats: Option<&NodeStats>,
    replications: usize,
    seed: u64,
    lazy: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let g = &graph.inner;
    let objective: Box<dyn BlockingObjective> = match estimator {
        "nie" => {
            let (Some(model), Some(stats)) = (model, stats) else {
                return Err(PyValueError::new_err("the nie estimator needs model and stats"));
            };
            Box::new(NieObjective::new(g, &stats.inner, &model.inner, &s_f).map_err(to_py)?)
        }
        "mcs" => Box::new(McsObjective::new(g, &s_f, replications, seed).map_err(to_py)?),
        "exact" => Box::new(ExactObjective::new(g, &s_f, DEFAULT_EXACT_MAX_EDGES).map_err(to_py)?),
        other => return Err(PyValueError::new_err(format!("unknown estimator {other:?}"))),
    };
    let run = || {
        let opts = SolveOptions::default();
        if lazy {
            celf(objective.as_ref(), k, &opts)
        } else {
            greedy(objective.as_ref(), k, &opts)
        }
    };
    let trace = py.detach(run).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("s_t", trace.solution())?;
    out.set_item("chosen", trace.chosen.clone())?;
    out.set_item("scores", trace.scores.clone())?;
    out.set_item("marginal_gains", trace.marginal_gains.clone())?;
    out.set_item("evaluations_used", trace.evaluations_used)?;
    out.set_item("completed", trace.completed)?;
    Ok(out)
}

#[pymodule]
fn nie(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<NodeStats>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(estimate_blocked, m)?)?;
    m.add_function(wrap_pyfunction!(exact_blocked, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(sample_problem, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
